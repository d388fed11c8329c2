//! Closed-form quantities behind the error guarantees: controllability
//! Gramians, kurtosis and conditioning constants, fourth-moment matrices of
//! the state, and the high-probability error bounds of the estimator.
//!
//! The universal constants in the bounds are not known in closed form, so
//! [`theorem_bound`] evaluates their *shape* for a caller-supplied constant
//! `C` and reports the bucket-count and bucket-size requirements with the
//! constants in [`BoundConstants`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{CORRUPTION_SURCHARGE, SCALAR_K_CONSTANT, VECTOR_K_CONSTANT};
use crate::matlib::{frobenius_norm, spectral_norm, sym_eig_spectrum, Mat, MatError};
use crate::sim::LtiSystem;

const EIG_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("fourth moment {sigma4t} is below the squared variance {}", sigma2 * sigma2)]
    JensenViolation { sigma2: f64, sigma4t: f64 },
    #[error("corruption fraction {eta} violates the limit {limit:e} required by the corrupted bound")]
    EtaTooLarge { eta: f64, limit: f64 },
    #[error("invalid bound inputs: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// `[I, A, A², …, A^{T−1}]`.
pub fn power_ladder(a: &Mat, horizon: usize) -> Vec<Mat> {
    assert!(a.is_square(), "matrix powers need a square matrix");
    let mut out = Vec::with_capacity(horizon);
    let mut p = Mat::identity(a.rows());
    for _ in 0..horizon {
        let next = &p * a;
        out.push(p);
        p = next;
    }
    out
}

/// `g_T = Σ_{t<T} a^{2t}`.
pub fn g_scalar(a: f64, horizon: usize) -> f64 {
    assert!(horizon >= 1, "horizon must be at least 1");
    let a2 = a * a;
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..horizon {
        sum += term;
        term *= a2;
    }
    sum
}

/// `G_T = Σ_{t<T} A^t (A^t)ᵀ`.
pub fn gramian(a: &Mat, horizon: usize) -> Mat {
    assert!(horizon >= 1, "horizon must be at least 1");
    let d = a.rows();
    power_ladder(a, horizon)
        .iter()
        .fold(Mat::zeros(d, d), |acc, p| &acc + &(p * &p.transpose()))
}

pub fn lambda_min(m: &Mat) -> Result<f64, MatError> {
    Ok(*sym_eig_spectrum(m, EIG_TOL)?.last().expect("nonempty"))
}

pub fn lambda_max(m: &Mat) -> Result<f64, MatError> {
    Ok(sym_eig_spectrum(m, EIG_TOL)?[0])
}

/// `C_A = (Σ_{t<T} ‖A^t‖² / λ_min(G_T))²`.
pub fn c_a(a: &Mat, horizon: usize) -> Result<f64, MatError> {
    let mut num = 0.0;
    for p in power_ladder(a, horizon) {
        num += spectral_norm(&p, EIG_TOL)?.powi(2);
    }
    let lmin = lambda_min(&gramian(a, horizon))?;
    Ok((num / lmin).powi(2))
}

/// Kurtosis `C_w = σ̃⁴ / σ⁴`.
pub fn c_w(sigma2: f64, sigma4t: f64) -> Result<f64, AnalysisError> {
    if !(sigma2 > 0.0) {
        return Err(AnalysisError::InvalidInput(format!("variance must be positive, got {sigma2}")));
    }
    if sigma4t < sigma2 * sigma2 {
        return Err(AnalysisError::JensenViolation { sigma2, sigma4t });
    }
    Ok(sigma4t / (sigma2 * sigma2))
}

/// `E[n nᵀ M n nᵀ]` for `n` with independent zero-mean coordinates of variance
/// σ² and fourth moment σ̃⁴:
/// `σ⁴ (M + Mᵀ + tr(M) I) + (σ̃⁴ − 3σ⁴) diag(M)`.
pub fn fourth_moment_sandwich(m: &Mat, sigma2: f64, sigma4t: f64) -> Mat {
    assert!(m.is_square(), "sandwich needs a square matrix");
    let s4 = sigma2 * sigma2;
    let tr = m.trace();
    Mat::from_fn(m.rows(), m.cols(), |i, j| {
        let mut v = s4 * (m[(i, j)] + m[(j, i)]);
        if i == j {
            v += s4 * tr + (sigma4t - 3.0 * s4) * m[(i, i)];
        }
        v
    })
}

/// `E[(x_T x_Tᵀ)²]` for a rollout from zero under coordinate-independent
/// noise, written as
/// `Σ_t A^t S(A^tᵀA^t) A^tᵀ + 2σ⁴ Σ_{s≠t} A^tA^tᵀA^sA^sᵀ + σ⁴ Σ_{s≠t} ‖A^s‖_F² A^tA^tᵀ`
/// where `S` is [`fourth_moment_sandwich`].
pub fn biquadratic_expectation(a: &Mat, horizon: usize, sigma2: f64, sigma4t: f64) -> Mat {
    let d = a.rows();
    let s4 = sigma2 * sigma2;
    let powers = power_ladder(a, horizon);
    let outer: Vec<Mat> = powers.iter().map(|p| p * &p.transpose()).collect();
    let fro2: Vec<f64> = powers.iter().map(|p| frobenius_norm(p).powi(2)).collect();

    let mut out = Mat::zeros(d, d);
    for (t, p) in powers.iter().enumerate() {
        let inner = fourth_moment_sandwich(&(&p.transpose() * p), sigma2, sigma4t);
        out = &out + &(&(p * &inner) * &p.transpose());
        for s in 0..horizon {
            if s == t {
                continue;
            }
            out = &out + &(&outer[t] * &outer[s]).scale(2.0 * s4);
            out = &out + &outer[t].scale(s4 * fro2[s]);
        }
    }
    // Symmetrise away rounding in the cross terms.
    (&out + &out.transpose()).scale(0.5)
}

/// `3 g_T² σ̃⁴`, an upper bound on `E[x_T⁴]` for a scalar system.
pub fn scalar_fourth_moment_bound(a: f64, horizon: usize, sigma4t: f64) -> f64 {
    3.0 * g_scalar(a, horizon).powi(2) * sigma4t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub system: LtiSystem,
    pub horizon: usize,
    pub sigma2: f64,
    pub sigma4t: f64,
    pub n: usize,
    pub delta: f64,
    #[serde(default)]
    pub eta: f64,
    /// The unspecified universal constant `C` of the error bounds.
    pub big_c: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |m: String| Err(AnalysisError::InvalidInput(m));
        if self.horizon == 0 || self.n == 0 {
            return bad("horizon and n must be positive".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(0.0..0.5).contains(&self.eta) {
            return bad(format!("eta must lie in [0, 0.5), got {}", self.eta));
        }
        if !(self.big_c > 0.0) {
            return bad("big_c must be positive".into());
        }
        c_w(self.sigma2, self.sigma4t).map(|_| ())
    }
}

/// `Σ_x = E[x_T x_Tᵀ] = σ² G_T`.
pub fn steady_covariance(inputs: &BoundInputs) -> Mat {
    gramian(inputs.system.a(), inputs.horizon).scale(inputs.sigma2)
}

/// Constants used to turn the theorems' `c₁, c₂, …` into numbers.
///
/// The bucket-count defaults come from the boosting arguments; the bucket
/// size defaults follow the Chebyshev steps bounding the covariance denominators, which
/// give `M ≥ (24/p) C_w` with `p = 1/4` in the scalar case and
/// `M ≥ (24/p) d² C_A C_w` with `p = 1/8` in the vector case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConstants {
    pub k_scalar: f64,
    pub k_vector: f64,
    pub corruption_surcharge: f64,
    pub m_scalar: f64,
    pub m_vector: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            k_scalar: SCALAR_K_CONSTANT,
            k_vector: VECTOR_K_CONSTANT,
            corruption_surcharge: CORRUPTION_SURCHARGE,
            m_scalar: 96.0,
            m_vector: 192.0,
        }
    }
}

impl BoundConstants {
    /// Largest admissible η for the corrupted bound, `0.5 / (c₁ d² C_A C_w)`.
    ///
    /// With `N = MK`, the bucket rule `K ≥ k (ln(1/δ) + ηN/2)` is satisfiable
    /// only while `surcharge · η · M < 1`; with `M = m_vector d² C_A C_w` this
    /// gives `c₁ = 2 · surcharge · m_vector`.
    pub fn eta_limit(&self, d: usize, ca: f64, cw: f64) -> f64 {
        let c1 = 2.0 * self.corruption_surcharge * self.m_vector;
        0.5 / (c1 * (d * d) as f64 * ca * cw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Scalar system, `|â − a| ≤ C √(ln(1/δ)/(N g_T))`.
    ScalarThm1,
    /// Vector system, `‖Â − A‖ ≤ C d^{3/2} √(ln(1/δ)/(N λ_min(G_T)))`.
    VectorThm2,
    /// Vector system under strong contamination; adds `C d^{3/2} √(η/λ_min(G_T))`.
    CorruptedThm3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremBound {
    pub error_bound: f64,
    pub k_required: usize,
    pub m_required: usize,
}

pub fn theorem_bound(
    inputs: &BoundInputs,
    which: Theorem,
    consts: &BoundConstants,
) -> Result<TheoremBound, AnalysisError> {
    inputs.validate()?;
    let a = inputs.system.a();
    let d = inputs.system.dim();
    let n = inputs.n as f64;
    let log_term = (1.0 / inputs.delta).ln();
    let cw = c_w(inputs.sigma2, inputs.sigma4t)?;

    match which {
        Theorem::ScalarThm1 => {
            if d != 1 {
                return Err(AnalysisError::InvalidInput(format!(
                    "the scalar bound needs a 1x1 system, got {d}x{d}"
                )));
            }
            let g = g_scalar(a[(0, 0)], inputs.horizon);
            Ok(TheoremBound {
                error_bound: inputs.big_c * (log_term / (n * g)).sqrt(),
                k_required: (consts.k_scalar * log_term).ceil() as usize,
                m_required: (consts.m_scalar * cw).ceil() as usize,
            })
        }
        Theorem::VectorThm2 | Theorem::CorruptedThm3 => {
            let lmin = lambda_min(&gramian(a, inputs.horizon))?;
            let ca = c_a(a, inputs.horizon)?;
            let dim_factor = (d as f64).powf(1.5);
            let mut error_bound = inputs.big_c * dim_factor * (log_term / (n * lmin)).sqrt();
            let mut k_exact = consts.k_vector * log_term;
            if which == Theorem::CorruptedThm3 {
                let limit = consts.eta_limit(d, ca, cw);
                if inputs.eta >= limit {
                    return Err(AnalysisError::EtaTooLarge {
                        eta: inputs.eta,
                        limit,
                    });
                }
                error_bound += inputs.big_c * dim_factor * (inputs.eta / lmin).sqrt();
                k_exact += consts.corruption_surcharge * inputs.eta * n;
            }
            Ok(TheoremBound {
                error_bound,
                k_required: k_exact.ceil() as usize,
                m_required: (consts.m_vector * (d * d) as f64 * ca * cw).ceil() as usize,
            })
        }
    }
}
