//! Command-line front end. `main.rs` only forwards to [`main_with_args`].

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::analysis::{
    c_a, c_w, g_scalar, gramian, lambda_min, steady_covariance, theorem_bound, BoundConstants, BoundInputs, Theorem,
};
use crate::estimator::{pooled_ols, robust_sysid};
use crate::harness::{
    estimator_config, run_experiment_with_threads, trial_dataset, ExperimentConfig, ExperimentOutput, HarnessError,
    Sweep,
};
use crate::matlib::{frobenius_norm, spectral_norm, Mat};
use crate::sim::{read_dataset, write_dataset, write_dataset_to, Dataset};

pub const THREADS_ENV: &str = "ROBUST_SYSID_THREADS";

#[derive(Debug, Parser)]
#[command(name = "robust-sysid", version, about = "Median-of-means system identification under heavy-tailed noise")]
pub struct Cli {
    /// Overrides the config's root_seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; ROBUST_SYSID_THREADS takes precedence.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset and cache it (stdout if --out is omitted).
    Simulate {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run both estimators once and print the estimates as JSON.
    Estimate {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Print system constants and theorem bounds as JSON.
    Analyze {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Full sweep; writes records.csv and summary.csv.
    Bench {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep over eta_values under the configured corruption.
    CorruptBench {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn thread_count(flag: Option<usize>) -> Result<usize, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(flag
            .filter(|&n| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))),
    }
}

fn load(args: &ConfigArg, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| match e {
        HarnessError::Io(err) => io_err(&args.config, err),
        other => other.into(),
    })?;
    if let Some(seed) = seed {
        cfg.root_seed = seed;
    }
    Ok(cfg)
}

/// Dataset of the first sweep point, seeded as trial 0 of the experiment.
fn first_dataset(cfg: &ExperimentConfig) -> Result<Dataset, Failure> {
    let sys = cfg.system()?;
    let point = cfg.sweep_points()?.remove(0);
    Ok(trial_dataset(cfg, &sys, &point, crate::harness::trial_seed(cfg.root_seed, 0, 0)))
}

fn rows(m: &Mat) -> Value {
    json!(m.to_rows())
}

fn errors(a_hat: &Mat, a: &Mat) -> Value {
    let diff = a_hat - a;
    json!({
        "spectral_error": spectral_norm(&diff, 1e-12).ok(),
        "frobenius_error": frobenius_norm(&diff),
    })
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialise"));
}

fn simulate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(), Failure> {
    let data = first_dataset(cfg)?;
    match out {
        Some(path) => write_dataset(&data, path).map_err(|e| io_err(path, e)),
        None => write_dataset_to(&data, std::io::stdout().lock()).map_err(|e| Failure::Io(e.to_string())),
    }
}

fn estimate(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let sys = cfg.system()?;
    let data = match &cfg.dataset {
        Some(path) => read_dataset(path).map_err(|e| match e {
            crate::sim::DatasetIoError::Io(err) => io_err(path, err),
            other => Failure::Config(other.to_string()),
        })?,
        None => first_dataset(cfg)?,
    };
    if data.system_dim() != sys.dim() {
        return Err(Failure::Config(format!(
            "dataset dimension {} does not match the {}x{} system",
            data.system_dim(),
            sys.dim(),
            sys.dim()
        )));
    }
    let point = cfg.sweep_points()?.remove(0);
    let est_cfg = estimator_config(cfg, &point, sys.dim());
    let robust = robust_sysid(&data, &est_cfg).map_err(|e| Failure::Config(e.to_string()))?;
    let pooled = pooled_ols(&data, est_cfg.ols_eps);
    print_json(&json!({
        "d": sys.dim(),
        "horizon": data.horizon(),
        "N": data.len(),
        "K": robust.plan.k,
        "M": robust.plan.m,
        "dropped": robust.plan.dropped(),
        "corrupted": data.corrupted_indices().len(),
        "a_true": rows(sys.a()),
        "robust": {
            "a_hat": rows(&robust.a_hat),
            "errors": errors(&robust.a_hat, sys.a()),
            "gm_iterations": robust.gm_iterations,
            "gm_converged": robust.gm_converged,
            "min_bucket_eig": robust.min_bucket_eig(),
        },
        "pooled_ols": match pooled {
            Ok(a) => json!({"a_hat": rows(&a), "errors": errors(&a, sys.a())}),
            Err(e) => json!({"error": e.to_string()}),
        },
    }));
    Ok(())
}

fn analyze(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let sys = cfg.system()?;
    let a = sys.a();
    let t = cfg.horizon;
    let sigma2 = cfg.noise.variance();
    let sigma4t = cfg.noise.fourth_moment();
    let g = gramian(a, t);
    let inputs = BoundInputs {
        system: sys.clone(),
        horizon: t,
        sigma2,
        sigma4t,
        n: cfg.n,
        delta: cfg.delta.unwrap_or(0.01),
        eta: cfg.eta,
        big_c: cfg.big_c,
    };
    let consts = BoundConstants::default();
    let bound = |which| match theorem_bound(&inputs, which, &consts) {
        Ok(b) => serde_json::to_value(b).expect("bounds serialise"),
        Err(e) => json!({"error": e.to_string()}),
    };
    let ca = c_a(a, t).ok();
    let cw = c_w(sigma2, sigma4t).ok();
    print_json(&json!({
        "d": sys.dim(),
        "horizon": t,
        "a": rows(a),
        "g_T": (sys.dim() == 1).then(|| g_scalar(a[(0, 0)], t)),
        "G_T": rows(&g),
        "lambda_min": lambda_min(&g).ok(),
        "C_A": ca,
        "C_w": cw,
        "noise": cfg.noise,
        "sigma2": sigma2,
        "sigma4t": sigma4t,
        "steady_covariance": rows(&steady_covariance(&inputs)),
        "eta_limit": match (ca, cw) {
            (Some(ca), Some(cw)) => Some(consts.eta_limit(sys.dim(), ca, cw)),
            _ => None,
        },
        "bounds": {
            "scalar": bound(Theorem::ScalarThm1),
            "vector": bound(Theorem::VectorThm2),
            "corrupted": bound(Theorem::CorruptedThm3),
        },
    }));
    Ok(())
}

fn bench(cfg: &ExperimentConfig, out: &Path, threads: usize, quiet: bool) -> Result<(), Failure> {
    let result: ExperimentOutput = run_experiment_with_threads(cfg, threads)?;
    result.write_to_dir(out).map_err(|e| match e {
        HarnessError::Io(err) => io_err(out, err),
        other => other.into(),
    })?;
    if !quiet {
        let mut err = std::io::stderr().lock();
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
        let _ = writeln!(err, "{:<12} {:>12} {:>6} {:>5} {:>11} {:>11} {:>11}", "estimator", "sweep", "ok", "fail", "median", "q90", "q999");
        for s in &result.summaries {
            let _ = writeln!(
                err,
                "{:<12} {:>12} {:>6} {:>5} {:>11} {:>11} {:>11}",
                s.estimator_name,
                s.sweep_value,
                s.count,
                s.failures,
                fmt(s.median),
                fmt(s.q90),
                fmt(s.q999)
            );
        }
        let _ = writeln!(err, "wrote {} records to {}", result.records.len(), out.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let threads = thread_count(cli.threads)?;
    match &cli.command {
        Command::Simulate { cfg, out } => simulate(&load(cfg, cli.seed)?, out.as_deref()),
        Command::Estimate { cfg } => estimate(&load(cfg, cli.seed)?),
        Command::Analyze { cfg } => analyze(&load(cfg, cli.seed)?),
        Command::Bench { cfg, out } => bench(&load(cfg, cli.seed)?, out, threads, cli.quiet),
        Command::CorruptBench { cfg, out } => {
            let cfg = load(cfg, cli.seed)?;
            if !matches!(cfg.sweep, Some(Sweep::EtaValues(_))) {
                return Err(Failure::Config("corrupt-bench needs an eta_values sweep".into()));
            }
            if cfg.corruption.is_none() {
                return Err(Failure::Config("corrupt-bench needs a corruption strategy".into()));
            }
            bench(&cfg, out, threads, cli.quiet)
        }
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(msg) | Failure::Io(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
