use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::matlib::Mat;
use crate::noise::{NoiseSpec, SeededRng};
use crate::sim::{random_stable_matrix, CorruptionStrategy, LtiSystem};

/// Named systems usable from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Preset {
    /// `scale · I_d`.
    ScaledIdentity { d: usize, scale: f64 },
    /// Seeded non-normal matrix with the given spectral radius.
    RandomStable { d: usize, radius: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Matrix { matrix: Mat },
    Preset(Preset),
}

impl SystemSpec {
    pub fn build(&self) -> Result<LtiSystem, HarnessError> {
        let a = match self {
            SystemSpec::Matrix { matrix } => matrix.clone(),
            SystemSpec::Preset(Preset::ScaledIdentity { d, scale }) => {
                if *d == 0 || !scale.is_finite() {
                    return Err(HarnessError::Config("scaled_identity needs d ≥ 1 and a finite scale".into()));
                }
                Mat::identity(*d).scale(*scale)
            }
            SystemSpec::Preset(Preset::RandomStable { d, radius, seed }) => {
                if *d == 0 || !(radius.is_finite() && *radius >= 0.0) {
                    return Err(HarnessError::Config("random_stable needs d ≥ 1 and a radius ≥ 0".into()));
                }
                random_stable_matrix(*d, *radius, &mut SeededRng::new(*seed))
            }
        };
        LtiSystem::new(a).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

/// The single axis an experiment sweeps over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    NValues(Vec<usize>),
    DeltaValues(Vec<f64>),
    EtaValues(Vec<f64>),
    /// Noise kurtosis at fixed variance; the noise family is kept.
    KurtosisValues(Vec<f64>),
}

impl Sweep {
    pub fn len(&self) -> usize {
        match self {
            Sweep::NValues(v) => v.len(),
            Sweep::DeltaValues(v) | Sweep::EtaValues(v) | Sweep::KurtosisValues(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> f64 {
        match self {
            Sweep::NValues(v) => v[i] as f64,
            Sweep::DeltaValues(v) | Sweep::EtaValues(v) | Sweep::KurtosisValues(v) => v[i],
        }
    }

    pub fn axis_name(&self) -> &'static str {
        match self {
            Sweep::NValues(_) => "n",
            Sweep::DeltaValues(_) => "delta",
            Sweep::EtaValues(_) => "eta",
            Sweep::KurtosisValues(_) => "kurtosis",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Robust,
    PooledOls,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Robust => "robust",
            EstimatorKind::PooledOls => "pooled_ols",
        }
    }
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Robust, EstimatorKind::PooledOls]
}

fn default_delta() -> Option<f64> {
    Some(0.01)
}

fn default_big_c() -> f64 {
    1.0
}

fn default_gm_tol() -> f64 {
    1e-10
}

/// One experiment, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub horizon: usize,
    pub noise: NoiseSpec,
    pub trials: usize,
    /// Trajectories per dataset when the sweep is not over `n`.
    pub n: usize,
    /// Failure probability used for the bucket rule.
    #[serde(default = "default_delta")]
    pub delta: Option<f64>,
    /// Explicit bucket count; overrides the `delta` rule.
    #[serde(default)]
    pub bucket_count: Option<usize>,
    #[serde(default)]
    pub eta: f64,
    /// Adversary applied to `⌊ηN⌋` trajectories; `None` means clean data.
    #[serde(default)]
    pub corruption: Option<CorruptionStrategy>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub k_constant: Option<f64>,
    #[serde(default)]
    pub corruption_surcharge: Option<f64>,
    #[serde(default = "default_big_c")]
    pub big_c: f64,
    #[serde(default = "default_gm_tol")]
    pub gm_tol: f64,
    /// Cached dataset for `estimate`, as written by `simulate`.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
}

/// Resolved parameters of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub value: f64,
    pub n: usize,
    pub delta: Option<f64>,
    pub eta: f64,
    pub noise: NoiseSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let sys = self.system.build()?;
        if self.horizon == 0 || self.trials == 0 || self.n == 0 {
            return bad("horizon, trials and n must all be at least 1".into());
        }
        self.noise.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.estimators.is_empty() {
            return bad("at least one estimator is required".into());
        }
        if self.bucket_count.is_none() && self.delta.is_none() {
            return bad("either delta or bucket_count is required".into());
        }
        if let Some(delta) = self.delta {
            if !(delta > 0.0 && delta < 1.0) {
                return bad(format!("delta must lie in (0, 1), got {delta}"));
            }
        }
        if !(0.0..0.5).contains(&self.eta) {
            return bad(format!("eta must lie in [0, 0.5), got {}", self.eta));
        }
        if let Some(CorruptionStrategy::TargetedFakeA { a_bad }) = &self.corruption {
            if a_bad.shape() != (sys.dim(), sys.dim()) {
                return bad("a_bad must match the system dimension".into());
            }
        }
        if !(self.big_c > 0.0 && self.gm_tol > 0.0) {
            return bad("big_c and gm_tol must be positive".into());
        }
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() {
                return bad("sweep must list at least one value".into());
            }
            if (1..sweep.len()).any(|i| sweep.value(i) <= sweep.value(i - 1)) {
                return bad(format!("{}_values must be strictly increasing", sweep.axis_name()));
            }
        }
        for p in self.sweep_points()? {
            if p.n == 0 {
                return bad("n values must be positive".into());
            }
            if let Some(delta) = p.delta {
                if !(delta > 0.0 && delta < 1.0) {
                    return bad(format!("delta must lie in (0, 1), got {delta}"));
                }
            }
            if !(0.0..0.5).contains(&p.eta) {
                return bad(format!("eta must lie in [0, 0.5), got {}", p.eta));
            }
        }
        Ok(())
    }

    pub fn system(&self) -> Result<LtiSystem, HarnessError> {
        self.system.build()
    }

    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>, HarnessError> {
        let base = SweepPoint {
            index: 0,
            value: f64::NAN,
            n: self.n,
            delta: self.delta,
            eta: self.eta,
            noise: self.noise,
        };
        let Some(sweep) = &self.sweep else {
            return Ok(vec![SweepPoint { value: 0.0, ..base }]);
        };
        (0..sweep.len())
            .map(|i| {
                let mut p = SweepPoint {
                    index: i,
                    value: sweep.value(i),
                    ..base.clone()
                };
                match sweep {
                    Sweep::NValues(v) => p.n = v[i],
                    Sweep::DeltaValues(v) => p.delta = Some(v[i]),
                    Sweep::EtaValues(v) => p.eta = v[i],
                    Sweep::KurtosisValues(v) => {
                        p.noise = NoiseSpec::with_kurtosis(self.noise.kind(), self.noise.variance(), v[i])
                            .map_err(|e| HarnessError::Config(e.to_string()))?;
                    }
                }
                Ok(p)
            })
            .collect()
    }
}
