//! A small fraction of adversarial trajectories ruins pooled least squares
//! but only shifts the median-of-buckets estimate.

use robust_sysid::prelude::*;

pub fn main() {
    let sys = LtiSystem::new(Mat::from_rows(&[[0.4, 0.2], [0.0, 0.3]]).unwrap()).unwrap();
    let clean = collect(&sys, &NoiseSpec::gaussian(1.0).unwrap(), 6, 3000, 9);
    let strategies = [
        CorruptionStrategy::GrossOutlier { magnitude: 100.0 },
        CorruptionStrategy::SignFlipScale { gamma: 10.0 },
        CorruptionStrategy::TargetedFakeA { a_bad: Mat::from_rows(&[[-0.9, 0.0], [0.5, 0.9]]).unwrap() },
    ];
    for strategy in strategies {
        let spec = CorruptionSpec::new(0.02, strategy.clone()).unwrap();
        let dirty = corrupt(&clean, &spec, &mut SeededRng::new(10)).unwrap();
        let est = robust_sysid(&dirty, &EstimatorConfig::with_buckets(150)).unwrap();
        let robust = spectral_norm(&(&est.a_hat - sys.a()), 1e-12).unwrap();
        let pooled = spectral_norm(&(&pooled_ols(&dirty, 1e-12).unwrap() - sys.a()), 1e-12).unwrap();
        println!(
            "{:<60} corrupted {:>3}: robust {robust:.4}, pooled {pooled:.4}",
            format!("{strategy:?}"),
            dirty.corrupted_indices().len()
        );
        assert!(robust < pooled);
    }
}
