//! The scalar error bound `C √(ln(1/δ)/(N g_T))` with a pinned constant.

use robust_sysid::analysis::g_scalar;
use robust_sysid::noise::derive_seed;
use robust_sysid::prelude::*;

const N: usize = 3700;
const HORIZON: usize = 10;
const DELTA: f64 = 0.01;
const TRIALS: u64 = 500;

/// Calibrated once from a pilot of 500 trials on seed stream 1 (largest
/// observed ratio 1.52, rounded up).
const PINNED_C: f64 = 1.55;

/// Observed error divided by `√(ln(1/δ)/(N g_T))` for each trial.
fn normalised_errors(stream: u64) -> Vec<f64> {
    let a = 0.9;
    let sys = LtiSystem::new(Mat::from_rows(&[[a]]).unwrap()).unwrap();
    let noise = NoiseSpec::gaussian(1.0).unwrap();
    let cfg = EstimatorConfig::with_delta(EstimatorMode::Scalar, DELTA);
    let rate = ((1.0 / DELTA).ln() / (N as f64 * g_scalar(a, HORIZON))).sqrt();
    (0..TRIALS)
        .map(|t| {
            let data = collect(&sys, &noise, HORIZON, N, derive_seed(&[stream, t]));
            let est = robust_sysid(&data, &cfg).unwrap();
            assert_eq!(est.plan.k, 37);
            (est.a_hat[(0, 0)] - a).abs() / rate
        })
        .collect()
}

#[test]
#[ignore = "pilot run; prints the value pinned in PINNED_C"]
fn pilot_calibration() {
    let ratios = normalised_errors(1);
    println!("max ratio {:.4}", ratios.iter().copied().fold(0.0, f64::max));
}

#[test]
fn scalar_bound_holds_with_the_pinned_constant() {
    let ratios = normalised_errors(2);
    let exceed = ratios.iter().filter(|&&r| r > PINNED_C).count() as f64;
    // δ plus three binomial standard errors.
    let allowed = TRIALS as f64 * (DELTA + 3.0 * (DELTA * (1.0 - DELTA) / TRIALS as f64).sqrt());
    assert!(exceed <= allowed, "{exceed} of {TRIALS} trials exceed C = {PINNED_C}");
}
