//! Drives a sweep from a JSON config, as the `bench` subcommand does, and
//! prints the per-point quantile summary.

use robust_sysid::prelude::*;

const CONFIG: &str = r#"{
    "system": {"preset": "random_stable", "d": 2, "radius": 0.8, "seed": 5},
    "horizon": 8,
    "noise": {"kind": "student", "nu": 5.0, "scale": 1.0},
    "trials": 40,
    "n": 2000,
    "delta": 0.05,
    "sweep": {"n_values": [1000, 4000, 16000]},
    "root_seed": 11
}"#;

pub fn main() {
    let cfg = ExperimentConfig::from_json(CONFIG).unwrap();
    let out = run_experiment(&cfg).unwrap();
    println!("{:<12} {:>7} {:>10} {:>10} {:>10}", "estimator", "N", "median", "q90", "max");
    for s in &out.summaries {
        println!(
            "{:<12} {:>7} {:>10.4} {:>10.4} {:>10.4}",
            s.estimator_name,
            s.sweep_value,
            s.median.unwrap(),
            s.q90.unwrap(),
            s.max.unwrap()
        );
    }
    let robust: Vec<f64> = out
        .summaries
        .iter()
        .filter(|s| s.estimator_name == "robust")
        .map(|s| s.median.unwrap())
        .collect();
    assert!(robust.windows(2).all(|w| w[1] < w[0]), "error should shrink with N: {robust:?}");
}
