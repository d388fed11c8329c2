//! Process-noise distributions with exactly known second and fourth moments.
//!
//! Every [`NoiseSpec`] draws coordinates independently, so a vector draw has
//! covariance `variance() * I` and per-coordinate fourth moment
//! `fourth_moment()`.
//!
//! # Seed derivation
//!
//! Random streams are ChaCha8 generators keyed by a 64-bit seed. Child
//! streams are derived, never split from a live generator:
//! `derive_seed(&[root, i, j, ...])` folds each index into the root with the
//! SplitMix64 finaliser. The harness uses `(root_seed, sweep_index,
//! trial_index)` for a trial and `(trial_seed, trajectory_index)` for each
//! trajectory, so results do not depend on how work is scheduled.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matlib::Vector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("invalid noise parameter: {0}")]
    InvalidParameter(String),
}

/// Coordinate distribution of the process noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian {
        sigma: f64,
    },
    /// `±b` with probability `q/2` each, zero otherwise. Kurtosis is `1/q`.
    #[serde(rename = "spike")]
    SpikeScale {
        q: f64,
        b: f64,
    },
    /// Student t with `nu > 4` degrees of freedom, rescaled to variance `scale²`.
    #[serde(rename = "student")]
    StudentLike {
        nu: f64,
        scale: f64,
    },
}

/// Which family a [`NoiseSpec`] belongs to, without its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Spike,
    Student,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Spike => "spike",
            NoiseKind::Student => "student",
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), NoiseError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(NoiseError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Result<Self, NoiseError> {
        let spec = NoiseSpec::Gaussian { sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn spike(q: f64, b: f64) -> Result<Self, NoiseError> {
        let spec = NoiseSpec::SpikeScale { q, b };
        spec.validate()?;
        Ok(spec)
    }

    pub fn student(nu: f64, scale: f64) -> Result<Self, NoiseError> {
        let spec = NoiseSpec::StudentLike { nu, scale };
        spec.validate()?;
        Ok(spec)
    }

    /// A spec of the given family with variance `variance` and kurtosis
    /// `kurtosis`. Gaussian noise only admits kurtosis 3; spike noise needs
    /// kurtosis ≥ 1 and Student noise kurtosis > 3.
    pub fn with_kurtosis(kind: NoiseKind, variance: f64, kurtosis: f64) -> Result<Self, NoiseError> {
        positive("variance", variance)?;
        let sd = variance.sqrt();
        match kind {
            NoiseKind::Gaussian if (kurtosis - 3.0).abs() <= 1e-12 => Self::gaussian(sd),
            NoiseKind::Gaussian => Err(NoiseError::InvalidParameter(format!(
                "gaussian noise has kurtosis 3, requested {kurtosis}"
            ))),
            NoiseKind::Spike if kurtosis >= 1.0 => Self::spike(1.0 / kurtosis, sd * kurtosis.sqrt()),
            NoiseKind::Student if kurtosis > 3.0 => Self::student(4.0 + 6.0 / (kurtosis - 3.0), sd),
            _ => Err(NoiseError::InvalidParameter(format!(
                "kurtosis {kurtosis} is not attainable by {} noise",
                kind.name()
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        match *self {
            NoiseSpec::Gaussian { sigma } => positive("sigma", sigma),
            NoiseSpec::SpikeScale { q, b } => {
                positive("b", b)?;
                if q > 0.0 && q <= 1.0 {
                    Ok(())
                } else {
                    Err(NoiseError::InvalidParameter(format!(
                        "spike probability q must lie in (0, 1], got {q}"
                    )))
                }
            }
            NoiseSpec::StudentLike { nu, scale } => {
                positive("scale", scale)?;
                if nu.is_finite() && nu > 4.0 {
                    Ok(())
                } else {
                    Err(NoiseError::InvalidParameter(format!(
                        "student degrees of freedom must exceed 4, got {nu}"
                    )))
                }
            }
        }
    }

    pub fn kind(&self) -> NoiseKind {
        match self {
            NoiseSpec::Gaussian { .. } => NoiseKind::Gaussian,
            NoiseSpec::SpikeScale { .. } => NoiseKind::Spike,
            NoiseSpec::StudentLike { .. } => NoiseKind::Student,
        }
    }

    /// Per-coordinate variance σ².
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { sigma } => sigma * sigma,
            NoiseSpec::SpikeScale { q, b } => q * b * b,
            NoiseSpec::StudentLike { scale, .. } => scale * scale,
        }
    }

    /// Per-coordinate fourth moment σ̃⁴.
    pub fn fourth_moment(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { sigma } => 3.0 * sigma.powi(4),
            NoiseSpec::SpikeScale { q, b } => q * b.powi(4),
            NoiseSpec::StudentLike { nu, scale } => scale.powi(4) * (3.0 + 6.0 / (nu - 4.0)),
        }
    }

    pub fn kurtosis(&self) -> f64 {
        self.fourth_moment() / self.variance().powi(2)
    }

    pub fn sample_scalar(&self, rng: &mut SeededRng) -> f64 {
        match *self {
            NoiseSpec::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseSpec::SpikeScale { q, b } => {
                let u: f64 = rng.random();
                if u < 0.5 * q {
                    -b
                } else if u < q {
                    b
                } else {
                    0.0
                }
            }
            NoiseSpec::StudentLike { nu, scale } => {
                // nu > 4 is enforced by every constructor and by validate().
                let t: f64 = StudentT::new(nu)
                    .expect("validated degrees of freedom")
                    .sample(rng);
                t * scale * ((nu - 2.0) / nu).sqrt()
            }
        }
    }

    /// `d` independent coordinates, drawn in index order.
    pub fn sample_vector(&self, d: usize, rng: &mut SeededRng) -> Vector {
        let mut v = Vector::zeros(d);
        for x in v.as_mut_slice() {
            *x = self.sample_scalar(rng);
        }
        v
    }
}

/// Anything that can supply the noise vector `w_t` for a rollout.
///
/// `step` runs over `0..=horizon`; the draw at `step == horizon` is the one
/// that enters the final transition `x_{T+1} = A x_T + w_T`.
pub trait NoiseSource: Sync {
    fn fill(&self, step: usize, horizon: usize, rng: &mut SeededRng, out: &mut [f64]);
}

impl NoiseSource for NoiseSpec {
    fn fill(&self, _step: usize, _horizon: usize, rng: &mut SeededRng, out: &mut [f64]) {
        for x in out {
            *x = self.sample_scalar(rng);
        }
    }
}

/// Noise that is identically zero. Consumes no randomness.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn fill(&self, _step: usize, _horizon: usize, _rng: &mut SeededRng, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Draws from `excitation` while the state is being driven and emits zero on
/// the final transition, so `(x_T, x_{T+1})` pairs satisfy `x_{T+1} = A x_T`
/// exactly while `x_T` still spans the state space.
#[derive(Debug, Clone, Copy)]
pub struct ExcitationOnly(pub NoiseSpec);

impl NoiseSource for ExcitationOnly {
    fn fill(&self, step: usize, horizon: usize, rng: &mut SeededRng, out: &mut [f64]) {
        if step < horizon {
            self.0.fill(step, horizon, rng, out);
        } else {
            out.fill(0.0);
        }
    }
}

/// Folds `parts` into a single 64-bit seed with the SplitMix64 finaliser.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243F_6A88_85A3_08D3_u64, |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(0x9E37_79B9_7F4A_7C15)))
    })
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic single-owner random stream.
#[derive(Debug, Clone)]
pub struct SeededRng {
    root_seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(root_seed: u64) -> Self {
        Self {
            root_seed,
            inner: ChaCha8Rng::seed_from_u64(root_seed),
        }
    }

    /// Independent stream keyed by `(root_seed, stream)`. Does not consume
    /// draws from `self`.
    pub fn child(&self, stream: u64) -> Self {
        Self::new(derive_seed(&[self.root_seed, stream]))
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
