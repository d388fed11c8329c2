//! The geometric median ignores a minority of arbitrarily bad points, unlike
//! the mean.

use robust_sysid::prelude::*;

pub fn main() {
    let mut rng = SeededRng::new(3);
    let noise = NoiseSpec::gaussian(0.05).unwrap();
    let centre = Mat::from_rows(&[[1.0, 0.5], [-0.2, 0.8]]).unwrap();
    let mut points: Vec<Mat> = (0..15)
        .map(|_| Mat::from_fn(2, 2, |i, j| centre[(i, j)] + noise.sample_scalar(&mut rng)))
        .collect();
    points.extend((0..6).map(|k| centre.scale(1e3 * (k as f64 + 1.0))));

    let gm = geometric_median(&points, &MedianOptions::default()).unwrap();
    let n = points.len() as f64;
    let mean = Mat::from_fn(2, 2, |i, j| points.iter().map(|p| p[(i, j)]).sum::<f64>() / n);
    let gm_err = frobenius_norm(&(&gm.point - &centre));
    let mean_err = frobenius_norm(&(&mean - &centre));
    println!("geometric median: error {gm_err:.3e} after {} iterations", gm.iterations);
    println!("mean:             error {mean_err:.3e}");
    assert!(gm.converged && gm_err < 0.2 && mean_err > 100.0);
}
