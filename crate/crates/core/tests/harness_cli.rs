//! End-to-end checks of the binary and of the CSV reports it writes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use robust_sysid::harness::{read_records, read_summaries, summarize};
use robust_sysid::harness::{run_experiment, ExperimentConfig};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_robust-sysid");

const BENCH: &str = r#"{
    "system": {"preset": "scaled_identity", "d": 2, "scale": 0.5},
    "horizon": 8,
    "noise": {"kind": "student", "nu": 6.0, "scale": 1.0},
    "trials": 6,
    "n": 400,
    "sweep": {"n_values": [300, 600]},
    "root_seed": 17
}"#;

const CORRUPT: &str = r#"{
    "system": {"matrix": [[0.4, 0.2], [0.0, 0.3]]},
    "horizon": 6,
    "noise": {"kind": "gaussian", "sigma": 1.0},
    "trials": 3,
    "n": 600,
    "bucket_count": 25,
    "delta": null,
    "corruption": {"strategy": "gross_outlier", "magnitude": 100.0},
    "sweep": {"eta_values": [0.0, 0.05]}
}"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("ROBUST_SYSID_THREADS").output().unwrap()
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn bad_config_exits_with_one_and_missing_file_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"system": {"matrix": [[0.5]]}, "horizon": 0, "noise": {"kind": "gaussian", "sigma": 1.0}, "trials": 1, "n": 1}"#);
    let unknown = write(dir.path(), "unknown.json", &BENCH.replace("\"trials\"", "\"trails\": 1, \"trials\""));
    for cfg in [&bad, &unknown] {
        let out = run(&["analyze", "--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["analyze", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn simulate_then_estimate_uses_the_cached_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", BENCH);
    let data = dir.path().join("data.csv");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let direct = json_of(&run(&["estimate", "--config", cfg.to_str().unwrap()]));
    let mut with_data: Value = serde_json::from_str(BENCH).unwrap();
    with_data["dataset"] = Value::String(data.to_str().unwrap().into());
    let cached_cfg = write(dir.path(), "cached.json", &with_data.to_string());
    let cached = json_of(&run(&["estimate", "--config", cached_cfg.to_str().unwrap()]));
    assert_eq!(direct, cached);
    assert_eq!(direct["N"], 300);
    assert!(direct["robust"]["errors"]["spectral_error"].as_f64().unwrap() < 0.5);

    // A different seed yields a different dataset.
    let reseeded = json_of(&run(&["estimate", "--config", cfg.to_str().unwrap(), "--seed", "18"]));
    assert_ne!(direct["robust"]["a_hat"], reseeded["robust"]["a_hat"]);
}

#[test]
fn estimate_rejects_a_dataset_of_the_wrong_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let scalar = write(dir.path(), "scalar.json", &BENCH.replace("\"d\": 2", "\"d\": 1"));
    let data = dir.path().join("data.csv");
    assert!(run(&["simulate", "--config", scalar.to_str().unwrap(), "--out", data.to_str().unwrap()]).status.success());
    let mut cfg: Value = serde_json::from_str(BENCH).unwrap();
    cfg["dataset"] = Value::String(data.to_str().unwrap().into());
    let cfg = write(dir.path(), "cfg.json", &cfg.to_string());
    assert_eq!(run(&["estimate", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn analyze_reports_constants_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", &BENCH.replace("\"d\": 2", "\"d\": 1"));
    let v = json_of(&run(&["analyze", "--config", cfg.to_str().unwrap()]));
    // 1 + 0.25 + … + 0.25⁷
    let g: f64 = (0..8).map(|k| 0.25f64.powi(k)).sum();
    assert!((v["g_T"].as_f64().unwrap() - g).abs() < 1e-12);
    assert!((v["lambda_min"].as_f64().unwrap() - g).abs() < 1e-12);
    for key in ["scalar", "vector", "corrupted"] {
        assert!(v["bounds"].get(key).is_some(), "missing {key}");
    }
    assert!(v["bounds"]["scalar"]["error_bound"].as_f64().unwrap() > 0.0, "{}", v["bounds"]["scalar"]);
}

#[test]
fn bench_writes_reports_consistent_with_the_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", BENCH);
    let out_dir = dir.path().join("out");
    let out = run(&["bench", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--quiet"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stderr.is_empty());

    let records = read_records(&out_dir.join("records.csv")).unwrap();
    assert_eq!(records.len(), 2 * 6 * 2);
    for r in &records {
        assert!(r.is_ok(), "{}", r.status);
        assert!(r.k * r.m <= r.n);
        assert!(r.spectral_error.unwrap() <= r.frobenius_error.unwrap() * (1.0 + 1e-12));
    }
    let summaries = read_summaries(&out_dir.join("summary.csv")).unwrap();
    assert_eq!(summaries, summarize(&records));

    let direct = run_experiment(&ExperimentConfig::from_json(BENCH).unwrap()).unwrap();
    let strip = |rs: &[robust_sysid::harness::TrialRecord]| {
        rs.iter().map(|r| (r.seed, r.spectral_error.map(f64::to_bits))).collect::<Vec<_>>()
    };
    assert_eq!(strip(&records), strip(&direct.records));
}

#[test]
fn thread_variable_overrides_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", BENCH);
    let out_dir = dir.path().join("out");
    let args = ["bench", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--threads", "2", "--quiet"];
    let bad = Command::new(BIN).args(args).env("ROBUST_SYSID_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let good = Command::new(BIN).args(args).env("ROBUST_SYSID_THREADS", "3").output().unwrap();
    assert!(good.status.success());
}

#[test]
fn corrupt_bench_requires_an_eta_sweep_and_a_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let o = out_dir.to_str().unwrap();
    let no_sweep = write(dir.path(), "a.json", BENCH);
    assert_eq!(run(&["corrupt-bench", "--config", no_sweep.to_str().unwrap(), "--out", o]).status.code(), Some(1));

    let mut v: Value = serde_json::from_str(CORRUPT).unwrap();
    v.as_object_mut().unwrap().remove("corruption");
    let no_strategy = write(dir.path(), "b.json", &v.to_string());
    assert_eq!(run(&["corrupt-bench", "--config", no_strategy.to_str().unwrap(), "--out", o]).status.code(), Some(1));

    let ok = write(dir.path(), "c.json", CORRUPT);
    let out = run(&["corrupt-bench", "--config", ok.to_str().unwrap(), "--out", o, "--quiet"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = read_records(&out_dir.join("records.csv")).unwrap();
    assert_eq!(records.len(), 2 * 3 * 2);
    assert!(records.iter().all(|r| r.k * r.m <= r.n));
    let robust: Vec<_> = records.iter().filter(|r| r.estimator_name == "robust" && r.eta > 0.0).collect();
    let pooled: Vec<_> = records.iter().filter(|r| r.estimator_name == "pooled_ols" && r.eta > 0.0).collect();
    let worst_robust = robust.iter().map(|r| r.spectral_error.unwrap()).fold(0.0, f64::max);
    let best_pooled = pooled.iter().map(|r| r.spectral_error.unwrap()).fold(f64::INFINITY, f64::min);
    assert!(worst_robust < best_pooled, "{worst_robust} vs {best_pooled}");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", BENCH);
    let blocker = write(dir.path(), "file", "");
    let out = run(&["bench", "--config", cfg.to_str().unwrap(), "--out", blocker.join("sub").to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
