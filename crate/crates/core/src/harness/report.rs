use std::collections::BTreeMap;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::HarnessError;

/// One estimator on one Monte Carlo trial.
///
/// Failed trials keep their row: `status` carries the error text and the
/// error columns are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub trial_index: usize,
    pub estimator_name: String,
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub eta: f64,
    pub delta: Option<f64>,
    pub noise_kind: String,
    pub kurtosis: f64,
    pub seed: u64,
    pub status: String,
    pub spectral_error: Option<f64>,
    pub frobenius_error: Option<f64>,
    pub gm_iterations: usize,
    pub min_bucket_eig: Option<f64>,
    pub elapsed_ms: f64,
}

impl TrialRecord {
    pub const FIELDS: [&'static str; 20] = [
        "sweep_index",
        "sweep_value",
        "trial_index",
        "estimator_name",
        "d",
        "T",
        "N",
        "K",
        "M",
        "eta",
        "delta",
        "noise_kind",
        "kurtosis",
        "seed",
        "status",
        "spectral_error",
        "frobenius_error",
        "gm_iterations",
        "min_bucket_eig",
        "elapsed_ms",
    ];

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Spectral-error statistics for one `(estimator, sweep point)` group.
///
/// Quantiles use the nearest-rank rule: the `p`-quantile of `n` sorted values
/// is the `⌈p·n⌉`-th smallest. The statistics are empty when every trial in
/// the group failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub estimator_name: String,
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub count: usize,
    pub failures: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q90: Option<f64>,
    pub q99: Option<f64>,
    pub q999: Option<f64>,
    pub max: Option<f64>,
}

impl QuantileSummary {
    pub const FIELDS: [&'static str; 11] = [
        "estimator_name",
        "sweep_index",
        "sweep_value",
        "count",
        "failures",
        "mean",
        "median",
        "q90",
        "q99",
        "q999",
        "max",
    ];
}

/// Nearest-rank quantile of an ascending slice; `level` in `(0, 1]`.
pub fn nearest_rank(sorted: &[f64], level: f64) -> Option<f64> {
    if sorted.is_empty() || !(level > 0.0 && level <= 1.0) {
        return None;
    }
    // The small slack keeps e.g. 0.9·100 from rounding up to rank 91.
    let rank = ((level * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

/// Nearest-rank quantiles of `values` at each of `levels`.
pub fn quantiles(values: &[f64], levels: &[f64]) -> Result<Vec<f64>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::EmptyGroup("no values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    levels
        .iter()
        .map(|&p| {
            nearest_rank(&sorted, p).ok_or_else(|| HarnessError::Config(format!("quantile level {p} outside (0, 1]")))
        })
        .collect()
}

fn group_key(r: &TrialRecord) -> (usize, String) {
    (r.sweep_index, r.estimator_name.clone())
}

/// Summaries ordered by sweep index, then by first appearance of each
/// estimator. Groups whose trials all failed get empty statistics.
pub fn summarize(records: &[TrialRecord]) -> Vec<QuantileSummary> {
    let mut order: Vec<(usize, String)> = Vec::new();
    let mut groups: BTreeMap<(usize, String), (f64, Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let key = group_key(r);
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (r.sweep_value, Vec::new(), 0)
        });
        match r.spectral_error {
            Some(e) if r.is_ok() => entry.1.push(e),
            _ => entry.2 += 1,
        }
    }
    order.sort_by_key(|k| k.0);

    order
        .into_iter()
        .map(|key| {
            let (sweep_value, mut errs, failures) = groups.remove(&key).expect("grouped");
            errs.sort_by(f64::total_cmp);
            let q = |p| nearest_rank(&errs, p);
            QuantileSummary {
                estimator_name: key.1,
                sweep_index: key.0,
                sweep_value,
                count: errs.len(),
                failures,
                mean: (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64),
                median: q(0.5),
                q90: q(0.9),
                q99: q(0.99),
                q999: q(0.999),
                max: errs.last().copied(),
            }
        })
        .collect()
}

/// Like [`summarize`], but a group without a single successful trial is an
/// error.
pub fn summarize_strict(records: &[TrialRecord]) -> Result<Vec<QuantileSummary>, HarnessError> {
    let out = summarize(records);
    if let Some(s) = out.iter().find(|s| s.count == 0) {
        return Err(HarnessError::EmptyGroup(format!(
            "estimator {} at sweep point {}",
            s.estimator_name, s.sweep_index
        )));
    }
    Ok(out)
}

fn write_rows<T: Serialize>(rows: &[T], header: &[&str], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

pub fn write_records(records: &[TrialRecord], path: &Path) -> Result<(), HarnessError> {
    write_rows(records, &TrialRecord::FIELDS, path)
}

pub fn write_summaries(summaries: &[QuantileSummary], path: &Path) -> Result<(), HarnessError> {
    write_rows(summaries, &QuantileSummary::FIELDS, path)
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    read_rows(path)
}

pub fn read_summaries(path: &Path) -> Result<Vec<QuantileSummary>, HarnessError> {
    read_rows(path)
}
