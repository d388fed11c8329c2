//! Independent oracles: nalgebra for the linear algebra, quadrature and Monte
//! Carlo for the moment formulas.

use nalgebra::DMatrix;
use rand::Rng;
use robust_sysid::analysis::{biquadratic_expectation, fourth_moment_sandwich, gramian, lambda_min, power_ladder};
use robust_sysid::matlib::{frobenius_norm, mat_mul, solve_spd, spectral_norm, sym_eig_spectrum, Mat};
use robust_sysid::noise::{NoiseSpec, SeededRng};
use robust_sysid::sim::{collect, random_stable_matrix, reconstruct_last_input, LtiSystem};

fn to_na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn random_mat(r: usize, c: usize, rng: &mut SeededRng) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0))
}

#[test]
fn spectral_norm_matches_svd() {
    let mut rng = SeededRng::new(11);
    for (r, c) in [(4, 4), (3, 5), (6, 2), (1, 4)] {
        for _ in 0..25 {
            let m = random_mat(r, c, &mut rng);
            let ours = spectral_norm(&m, 1e-13).unwrap();
            let svd = to_na(&m).singular_values().max();
            assert!((ours - svd).abs() <= 1e-10 * svd, "{ours} vs {svd}");
        }
    }
}

#[test]
fn symmetric_spectrum_matches_nalgebra() {
    let mut rng = SeededRng::new(12);
    for d in 1..8 {
        let b = random_mat(d, d, &mut rng);
        let m = &b + &b.transpose();
        let ours = sym_eig_spectrum(&m, 1e-14).unwrap();
        let mut theirs: Vec<f64> = to_na(&m).symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() <= 1e-10 * frobenius_norm(&m).max(1.0));
        }
    }
}

#[test]
fn spd_solve_matches_nalgebra() {
    let mut rng = SeededRng::new(13);
    for d in 1..7 {
        let b = random_mat(d + 3, d, &mut rng);
        let m = mat_mul(&b.transpose(), &b).unwrap();
        let rhs = random_mat(2, d, &mut rng);
        let ours = solve_spd(&m, &rhs, 1e-12).unwrap();
        let theirs = to_na(&rhs) * to_na(&m).try_inverse().unwrap();
        for i in 0..2 {
            for j in 0..d {
                assert!((ours[(i, j)] - theirs[(i, j)]).abs() <= 1e-8 * (1.0 + theirs[(i, j)].abs()));
            }
        }
    }
}

/// `∫ sinᵏθ cos^pθ dθ` over `(−π/2, π/2)` by composite Simpson.
fn trig_integral(k: i32, p: f64) -> f64 {
    let n = 200_000;
    let (a, b) = (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    let h = (b - a) / n as f64;
    let f = |t: f64| t.sin().powi(k) * t.cos().abs().powf(p);
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn student_moments_match_quadrature() {
    // With x = √ν tanθ the t density becomes ∝ cos^{ν+1}θ, so
    // E[t^k] = ν^{k/2} ∫ sinᵏ cos^{ν−1−k} / ∫ cos^{ν−1}.
    for (nu, scale) in [(6.0, 1.0), (9.0, 0.7), (13.5, 2.0)] {
        let spec = NoiseSpec::student(nu, scale).unwrap();
        let norm = trig_integral(0, nu - 1.0);
        let t2 = nu * trig_integral(2, nu - 3.0) / norm;
        let t4 = nu * nu * trig_integral(4, nu - 5.0) / norm;
        let c2 = scale * scale * (nu - 2.0) / nu;
        assert!((c2 * t2 - spec.variance()).abs() <= 1e-8 * spec.variance());
        assert!((c2 * c2 * t4 - spec.fourth_moment()).abs() <= 1e-7 * spec.fourth_moment());
    }
}

struct Acc {
    n: f64,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Acc {
    fn new(k: usize) -> Self {
        Self { n: 0.0, sum: vec![0.0; k], sq: vec![0.0; k] }
    }
    fn push(&mut self, v: &[f64]) {
        self.n += 1.0;
        for (i, x) in v.iter().enumerate() {
            self.sum[i] += x;
            self.sq[i] += x * x;
        }
    }
    fn z(&self, i: usize, expected: f64) -> f64 {
        let m = self.sum[i] / self.n;
        let se = ((self.sq[i] / self.n - m * m) / self.n).sqrt();
        (m - expected).abs() / se.max(1e-300)
    }
}

fn kinds() -> Vec<NoiseSpec> {
    vec![
        NoiseSpec::gaussian(1.7).unwrap(),
        NoiseSpec::spike(0.04, 5.0).unwrap(),
        NoiseSpec::spike(1.0, 0.5).unwrap(),
        NoiseSpec::student(12.0, 1.3).unwrap(),
    ]
}

#[test]
fn noise_moments_by_monte_carlo() {
    for (k, spec) in kinds().into_iter().enumerate() {
        let mut rng = SeededRng::new(100 + k as u64);
        let mut acc = Acc::new(3);
        for _ in 0..1_000_000 {
            let x = spec.sample_scalar(&mut rng);
            acc.push(&[x, x * x, x.powi(4)]);
        }
        assert!(acc.z(0, 0.0) <= 4.0, "{spec:?} mean");
        assert!(acc.z(1, spec.variance()) <= 5.0, "{spec:?} variance");
        assert!(acc.z(2, spec.fourth_moment()) <= 5.0, "{spec:?} fourth moment");
    }
}

#[test]
fn sandwich_identity_by_monte_carlo() {
    let mut rng = SeededRng::new(7);
    let m = random_mat(3, 3, &mut rng);
    for spec in kinds() {
        let mut acc = Acc::new(9);
        for _ in 0..1_000_000 {
            let n = spec.sample_vector(3, &mut rng);
            let q: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| n[i] * m[(i, j)] * n[j]).sum();
            let v: Vec<f64> = (0..9).map(|e| q * n[e / 3] * n[e % 3]).collect();
            acc.push(&v);
        }
        let expected = fourth_moment_sandwich(&m, spec.variance(), spec.fourth_moment());
        for e in 0..9 {
            assert!(acc.z(e, expected.as_slice()[e]) <= 5.0, "{spec:?} entry {e}");
        }
    }
}

#[test]
fn simulated_states_are_centred_and_reconstructible() {
    let a = Mat::from_rows(&[[0.5, 0.4], [-0.3, 0.8]]).unwrap();
    let sys = LtiSystem::new(a).unwrap();
    let data = collect(&sys, &NoiseSpec::spike(0.1, 3.0).unwrap(), 6, 100_000, 5);
    let mut acc = Acc::new(2);
    for tr in data.trajectories() {
        acc.push(tr.last_input().as_slice());
        let rebuilt = reconstruct_last_input(&sys, tr);
        for i in 0..2 {
            assert!((rebuilt[i] - tr.last_input()[i]).abs() <= 1e-10);
        }
    }
    assert!(acc.z(0, 0.0) <= 4.0 && acc.z(1, 0.0) <= 4.0);
}

#[test]
fn gramian_dominates_identity() {
    let mut rng = SeededRng::new(21);
    for i in 0..100 {
        let d = 1 + i % 5;
        let a = random_stable_matrix(d, rng.random_range(0.0..0.99), &mut rng);
        assert!(lambda_min(&gramian(&a, 1 + i % 12)).unwrap() >= 1.0 - 1e-10);
    }
}

#[test]
fn biquadratic_is_psd_and_within_trace_bound() {
    let mut rng = SeededRng::new(22);
    for i in 0..100 {
        let d = 1 + i % 4;
        let t = 1 + i % 6;
        let a = random_mat(d, d, &mut rng).scale(0.6);
        let spec = &kinds()[i % 4];
        let (s2, s4) = (spec.variance(), spec.fourth_moment());
        let e = biquadratic_expectation(&a, t, s2, s4);
        assert!(e.max_abs_diff(&e.transpose()) <= 1e-12 * frobenius_norm(&e));
        let min = *sym_eig_spectrum(&e, 1e-13).unwrap().last().unwrap();
        assert!(min >= -1e-9 * e.trace());
        let norms: f64 = power_ladder(&a, t)
            .iter()
            .map(|p| spectral_norm(p, 1e-13).unwrap().powi(2))
            .sum();
        let bound = 3.0 * (d * d) as f64 * s4 * norms * norms;
        assert!(e.trace() <= bound * (1.0 + 1e-12), "trace {} > {bound}", e.trace());
    }
}

#[test]
fn scalar_biquadratic_matches_the_closed_form() {
    for (a, t, s2, s4) in [(0.5f64, 3usize, 1.0, 3.0), (-0.9, 5, 2.0, 25.0), (1.0, 2, 1.0, 3.0)] {
        let mut want = 0.0;
        for u in 0..t {
            want += a.powi(4 * u as i32) * s4;
            for v in 0..t {
                if u != v {
                    want += 3.0 * s2 * s2 * a.powi(2 * (u + v) as i32);
                }
            }
        }
        let got = biquadratic_expectation(&Mat::from_rows(&[[a]]).unwrap(), t, s2, s4)[(0, 0)];
        assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
    }
}
