//! Monte Carlo experiment driver.
//!
//! Each `(sweep point, trial)` pair is an independent work item seeded by
//! `derive_seed(&[root_seed, sweep_index, trial_index])`; results are
//! gathered in order, so the output does not depend on the thread count.

mod config;
mod report;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{EstimatorKind, ExperimentConfig, Preset, Sweep, SweepPoint, SystemSpec};
pub use report::{
    nearest_rank, quantiles, read_records, read_summaries, summarize, summarize_strict, write_records,
    write_summaries, QuantileSummary, TrialRecord,
};

use crate::estimator::{
    choose_bucket_count, plan_buckets, pooled_ols, robust_sysid, EstimatorConfig, EstimatorMode,
};
use crate::matlib::{frobenius_norm, spectral_norm, Mat};
use crate::noise::{derive_seed, SeededRng};
use crate::sim::{collect, corrupt, CorruptionSpec, Dataset, LtiSystem};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty group: {0}")]
    EmptyGroup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// True for failures of the filesystem rather than of the experiment.
    pub fn is_io(&self) -> bool {
        match self {
            HarnessError::Io(_) => true,
            HarnessError::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<QuantileSummary>,
}

impl ExperimentOutput {
    /// Writes `records.csv` and `summary.csv` into `dir`, creating it if needed.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        write_records(&self.records, &dir.join("records.csv"))?;
        write_summaries(&self.summaries, &dir.join("summary.csv"))
    }
}

/// Seed of trial `trial` at sweep point `sweep`.
pub fn trial_seed(root_seed: u64, sweep: usize, trial: usize) -> u64 {
    derive_seed(&[root_seed, sweep as u64, trial as u64])
}

/// Estimator configuration used for one sweep point.
pub fn estimator_config(cfg: &ExperimentConfig, point: &SweepPoint, d: usize) -> EstimatorConfig {
    let mode = if cfg.corruption.is_some() {
        EstimatorMode::Corrupted { eta: point.eta }
    } else if d == 1 {
        EstimatorMode::Scalar
    } else {
        EstimatorMode::Vector
    };
    let mut est = EstimatorConfig {
        bucket_count: cfg.bucket_count,
        delta: point.delta,
        mode,
        k_constant: cfg.k_constant,
        gm_tol: cfg.gm_tol,
        ..EstimatorConfig::default()
    };
    if let Some(s) = cfg.corruption_surcharge {
        est.corruption_surcharge = s;
    }
    est
}

/// The (possibly corrupted) dataset of one trial.
pub fn trial_dataset(cfg: &ExperimentConfig, sys: &LtiSystem, point: &SweepPoint, seed: u64) -> Dataset {
    let data = collect(sys, &point.noise, cfg.horizon, point.n, derive_seed(&[seed, 0]));
    match &cfg.corruption {
        Some(strategy) if point.eta > 0.0 => {
            let spec = CorruptionSpec::new(point.eta, strategy.clone()).expect("validated config");
            corrupt(&data, &spec, &mut SeededRng::new(derive_seed(&[seed, 1])))
                .expect("validated corruption shape")
        }
        _ => data,
    }
}

struct Fit {
    a_hat: Result<Mat, String>,
    gm_iterations: usize,
    min_bucket_eig: Option<f64>,
}

fn run_trial(cfg: &ExperimentConfig, sys: &LtiSystem, point: &SweepPoint, trial: usize) -> Vec<TrialRecord> {
    let d = sys.dim();
    let seed = trial_seed(cfg.root_seed, point.index, trial);
    let data = trial_dataset(cfg, sys, point, seed);
    let est_cfg = estimator_config(cfg, point, d);
    let (k, m) = choose_bucket_count(&est_cfg, point.n)
        .and_then(|k| plan_buckets(point.n, k))
        .map(|p| (p.k, p.m))
        .unwrap_or((0, 0));

    cfg.estimators
        .iter()
        .map(|&kind| {
            let start = Instant::now();
            let fit = match kind {
                EstimatorKind::Robust => match robust_sysid(&data, &est_cfg) {
                    Ok(r) => Fit {
                        gm_iterations: r.gm_iterations,
                        min_bucket_eig: Some(r.min_bucket_eig()),
                        a_hat: Ok(r.a_hat),
                    },
                    Err(e) => Fit {
                        a_hat: Err(e.to_string()),
                        gm_iterations: 0,
                        min_bucket_eig: None,
                    },
                },
                EstimatorKind::PooledOls => Fit {
                    a_hat: pooled_ols(&data, est_cfg.ols_eps).map_err(|e| e.to_string()),
                    gm_iterations: 0,
                    min_bucket_eig: None,
                },
            };
            let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            let (k, m) = match kind {
                EstimatorKind::Robust => (k, m),
                EstimatorKind::PooledOls => (1, point.n),
            };
            let (status, spectral_error, frobenius_error) = match &fit.a_hat {
                Ok(a_hat) => {
                    let diff = a_hat - sys.a();
                    let spec = spectral_norm(&diff, 1e-12).unwrap_or(f64::NAN);
                    ("ok".to_string(), Some(spec), Some(frobenius_norm(&diff)))
                }
                Err(msg) => (msg.clone(), None, None),
            };
            TrialRecord {
                sweep_index: point.index,
                sweep_value: point.value,
                trial_index: trial,
                estimator_name: kind.name().to_string(),
                d,
                horizon: cfg.horizon,
                n: point.n,
                k,
                m,
                eta: point.eta,
                delta: point.delta,
                noise_kind: point.noise.kind().name().to_string(),
                kurtosis: point.noise.kurtosis(),
                seed,
                status,
                spectral_error,
                frobenius_error,
                gm_iterations: fit.gm_iterations,
                min_bucket_eig: fit.min_bucket_eig,
                elapsed_ms,
            }
        })
        .collect()
}

fn run_all(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let sys = cfg.system()?;
    let points = cfg.sweep_points()?;
    let work: Vec<(&SweepPoint, usize)> = points
        .iter()
        .flat_map(|p| (0..cfg.trials).map(move |r| (p, r)))
        .collect();
    let records: Vec<TrialRecord> = work
        .par_iter()
        .map(|&(p, r)| run_trial(cfg, &sys, p, r))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let summaries = summarize(&records);
    Ok(ExperimentOutput { records, summaries })
}

/// Runs every sweep point and trial on the global rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    run_all(cfg)
}

/// As [`run_experiment`], on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_all(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"{{
                "system": {{"preset": "scaled_identity", "d": 2, "scale": 0.5}},
                "horizon": 4,
                "noise": {{"kind": "gaussian", "sigma": 1.0}},
                "trials": 3,
                "n": 60,
                "bucket_count": 5,
                "root_seed": 9
                {extra}
            }}"#
        );
        ExperimentConfig::from_json(&text).unwrap()
    }

    #[test]
    fn single_trial_single_estimator() {
        let mut cfg = config("");
        cfg.trials = 1;
        cfg.estimators = vec![EstimatorKind::Robust];
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.summaries.len(), 1);
        let r = &out.records[0];
        assert_eq!((r.k, r.m, r.n), (5, 12, 60));
        assert!(r.spectral_error.unwrap() >= 0.0);
    }

    #[test]
    fn row_order_is_sweep_trial_estimator() {
        let out = run_experiment(&config(r#", "sweep": {"n_values": [40, 80]}"#)).unwrap();
        let keys: Vec<(usize, usize, &str)> = out
            .records
            .iter()
            .map(|r| (r.sweep_index, r.trial_index, r.estimator_name.as_str()))
            .collect();
        assert_eq!(keys.len(), 12);
        assert_eq!(keys[0], (0, 0, "robust"));
        assert_eq!(keys[1], (0, 0, "pooled_ols"));
        assert_eq!(keys[11], (1, 2, "pooled_ols"));
        assert!(out.records.iter().all(|r| r.k * r.m <= r.n));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut cfg = config(r#", "sweep": {"delta_values": [0.1, 0.5]}"#);
        cfg.bucket_count = None;
        let strip = |o: ExperimentOutput| {
            o.records
                .into_iter()
                .map(|r| TrialRecord { elapsed_ms: 0.0, ..r })
                .collect::<Vec<_>>()
        };
        let a = strip(run_experiment_with_threads(&cfg, 1).unwrap());
        let b = strip(run_experiment_with_threads(&cfg, 4).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn failures_are_recorded_not_raised() {
        // Too many buckets for the smallest N.
        let cfg = config(r#", "sweep": {"n_values": [3, 60]}"#);
        let out = run_experiment(&cfg).unwrap();
        let bad: Vec<_> = out.records.iter().filter(|r| !r.is_ok()).collect();
        assert!(!bad.is_empty());
        assert!(bad.iter().all(|r| r.spectral_error.is_none() && r.estimator_name == "robust"));
        assert_eq!(out.summaries[0].count, 0);
    }
}
