//! Median-of-means system identification.
//!
//! [`robust_sysid`] splits the trajectories into `K` buckets of `M`, fits an
//! ordinary least-squares estimate of `A` inside each bucket from the last two
//! states of every trajectory, and returns the geometric median of the `K`
//! bucket estimates. [`pooled_ols`] is the single least-squares fit over all
//! trajectories that the robust estimator is compared against.

mod median;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matlib::{solve_spd, sym_eig_spectrum, Mat, MatError, Vector};
use crate::sim::Dataset;

pub use median::{geometric_median, median_objective, scalar_median, GeometricMedian, MedianOptions};

/// Default bucket-count multiplier for scalar systems (`K = ⌈8 ln(1/δ)⌉`).
pub const SCALAR_K_CONSTANT: f64 = 8.0;
/// Default bucket-count multiplier for vector systems (`K = ⌈32 ln(1/δ)⌉`).
pub const VECTOR_K_CONSTANT: f64 = 32.0;
/// Extra buckets per corrupted trajectory: `K ≥ 32 (ln(1/δ) + ηN/2)` adds `16 ηN`.
pub const CORRUPTION_SURCHARGE: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("cannot form {k} buckets from {n} trajectories")]
    TooFewTrajectories { k: usize, n: usize },
    #[error("bucket rule asks for {k} buckets but only {n} trajectories are available")]
    InfeasiblePlan { k: usize, n: usize },
    #[error("singular empirical covariance{}: {source}", bucket.map(|b| format!(" in bucket {b}")).unwrap_or_default())]
    SingularCovariance { bucket: Option<usize>, source: MatError },
    #[error("no input points")]
    EmptyInput,
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
}

/// Which theorem's bucket rule applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EstimatorMode {
    Scalar,
    Vector,
    /// Strong contamination of up to a fraction `eta` of the trajectories.
    Corrupted { eta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Explicit `K`; takes precedence over `delta`.
    pub bucket_count: Option<usize>,
    /// Target failure probability δ used to derive `K`.
    pub delta: Option<f64>,
    #[serde(flatten)]
    pub mode: EstimatorMode,
    /// Multiplier on `ln(1/δ)`; defaults to 8 (scalar) or 32 otherwise.
    pub k_constant: Option<f64>,
    /// Multiplier on `ηN` in corrupted mode.
    pub corruption_surcharge: f64,
    pub gm_tol: f64,
    pub gm_max_iter: usize,
    pub anchor_eps: f64,
    /// Relative pivot threshold for the least-squares Cholesky solve.
    pub ols_eps: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            bucket_count: None,
            delta: None,
            mode: EstimatorMode::Vector,
            k_constant: None,
            corruption_surcharge: CORRUPTION_SURCHARGE,
            gm_tol: 1e-10,
            gm_max_iter: 10_000,
            anchor_eps: 1e-12,
            ols_eps: 1e-12,
        }
    }
}

impl EstimatorConfig {
    pub fn with_buckets(k: usize) -> Self {
        Self {
            bucket_count: Some(k),
            ..Self::default()
        }
    }

    pub fn with_delta(mode: EstimatorMode, delta: f64) -> Self {
        Self {
            delta: Some(delta),
            mode,
            ..Self::default()
        }
    }

    pub fn effective_k_constant(&self) -> f64 {
        self.k_constant.unwrap_or(match self.mode {
            EstimatorMode::Scalar => SCALAR_K_CONSTANT,
            EstimatorMode::Vector | EstimatorMode::Corrupted { .. } => VECTOR_K_CONSTANT,
        })
    }

    pub fn median_options(&self) -> MedianOptions {
        MedianOptions {
            tol: self.gm_tol,
            max_iter: self.gm_max_iter,
            anchor_eps: self.anchor_eps,
        }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        let bad = |m: String| Err(EstimatorError::InvalidConfig(m));
        if self.bucket_count == Some(0) {
            return bad("bucket_count must be at least 1".into());
        }
        if self.bucket_count.is_none() && self.delta.is_none() {
            return bad("either bucket_count or delta is required".into());
        }
        if let Some(delta) = self.delta {
            if !(delta > 0.0 && delta < 1.0) {
                return bad(format!("delta must lie in (0, 1), got {delta}"));
            }
        }
        if let EstimatorMode::Corrupted { eta } = self.mode {
            if !(0.0..0.5).contains(&eta) {
                return bad(format!("eta must lie in [0, 0.5), got {eta}"));
            }
        }
        if !(self.effective_k_constant() > 0.0) || !(self.corruption_surcharge >= 0.0) {
            return bad("bucket constants must be positive".into());
        }
        if !(self.gm_tol > 0.0) || self.gm_max_iter == 0 || !(self.anchor_eps >= 0.0) || !(self.ols_eps > 0.0) {
            return bad("solver tolerances must be positive".into());
        }
        Ok(())
    }
}

/// Partition of trajectory indices into equal contiguous buckets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketPlan {
    pub k: usize,
    pub m: usize,
    pub n: usize,
}

impl BucketPlan {
    pub fn used(&self) -> usize {
        self.k * self.m
    }

    /// Trailing trajectories that do not fill a bucket.
    pub fn dropped(&self) -> usize {
        self.n - self.used()
    }

    pub fn bucket(&self, j: usize) -> std::ops::Range<usize> {
        assert!(j < self.k, "bucket index out of range");
        j * self.m..(j + 1) * self.m
    }

    pub fn assignments(&self) -> Vec<std::ops::Range<usize>> {
        (0..self.k).map(|j| self.bucket(j)).collect()
    }
}

pub fn plan_buckets(n: usize, k: usize) -> Result<BucketPlan, EstimatorError> {
    if k == 0 || k > n {
        return Err(EstimatorError::TooFewTrajectories { k, n });
    }
    Ok(BucketPlan { k, m: n / k, n })
}

/// `K` from the configured rule: `⌈c ln(1/δ)⌉`, plus `surcharge · η N` in
/// corrupted mode. An explicit `bucket_count` short-circuits the rule.
pub fn choose_bucket_count(config: &EstimatorConfig, n: usize) -> Result<usize, EstimatorError> {
    config.validate()?;
    let k = match (config.bucket_count, config.delta) {
        (Some(k), _) => k,
        (None, Some(delta)) => {
            let base = config.effective_k_constant() * (1.0 / delta).ln();
            let extra = match config.mode {
                EstimatorMode::Corrupted { eta } => config.corruption_surcharge * eta * n as f64,
                _ => 0.0,
            };
            ((base + extra).ceil() as usize).max(1)
        }
        (None, None) => unreachable!("validate() requires one of bucket_count or delta"),
    };
    if k > n {
        return Err(EstimatorError::InfeasiblePlan { k, n });
    }
    Ok(k)
}

struct BucketFit {
    estimate: Mat,
    min_cov_eig: f64,
}

fn fit<'a>(
    pairs: impl IntoIterator<Item = (&'a Vector, &'a Vector)>,
    eps: f64,
    with_diagnostics: bool,
) -> Result<BucketFit, EstimatorError> {
    let mut iter = pairs.into_iter().peekable();
    let d = iter.peek().ok_or(EstimatorError::EmptyInput)?.0.dim();
    let mut cross = Mat::zeros(d, d);
    let mut cov = Mat::zeros(d, d);
    let mut count = 0usize;
    for (x, y) in iter {
        if x.dim() != d || y.dim() != d {
            return Err(EstimatorError::ShapeMismatch {
                expected: (d, 1),
                got: (x.dim().max(y.dim()), 1),
            });
        }
        for i in 0..d {
            for j in 0..d {
                cross[(i, j)] += y[i] * x[j];
                cov[(i, j)] += x[i] * x[j];
            }
        }
        count += 1;
    }
    // Solve against D^{-1/2} cov D^{-1/2} (D = diag(cov)) so the rank test is
    // relative to each coordinate's own scale, not dominated by an outlier.
    let singular = |source| EstimatorError::SingularCovariance { bucket: None, source };
    let scale: Vec<f64> = (0..d).map(|i| cov[(i, i)].sqrt()).collect();
    if let Some(i) = scale.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(singular(MatError::NotPositiveDefinite {
            pivot: i,
            value: cov[(i, i)],
            threshold: 0.0,
        }));
    }
    let cov_eq = Mat::from_fn(d, d, |i, j| cov[(i, j)] / (scale[i] * scale[j]));
    let cross_eq = Mat::from_fn(d, d, |i, j| cross[(i, j)] / scale[j]);
    let z = solve_spd(&cov_eq, &cross_eq, eps).map_err(singular)?;
    let estimate = Mat::from_fn(d, d, |i, j| z[(i, j)] / scale[j]);
    let min_cov_eig = if with_diagnostics {
        let scaled = cov.scale(1.0 / count as f64);
        sym_eig_spectrum(&scaled, 1e-12)
            .map(|e| *e.last().expect("nonempty spectrum"))
            .unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    Ok(BucketFit { estimate, min_cov_eig })
}

/// Least-squares fit `(Σ y xᵀ)(Σ x xᵀ)⁻¹` over `(x, y)` pairs.
pub fn ols_bucket<'a>(
    pairs: impl IntoIterator<Item = (&'a Vector, &'a Vector)>,
    eps: f64,
) -> Result<Mat, EstimatorError> {
    fit(pairs, eps, false).map(|f| f.estimate)
}

/// Least squares over every trajectory's final pair.
pub fn pooled_ols(data: &Dataset, eps: f64) -> Result<Mat, EstimatorError> {
    ols_bucket(data.last_pairs(), eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustEstimate {
    pub a_hat: Mat,
    pub bucket_estimates: Vec<Mat>,
    pub gm_iterations: usize,
    pub gm_converged: bool,
    pub plan: BucketPlan,
    /// Smallest eigenvalue of `(1/M) Σ x_T x_Tᵀ` in each bucket.
    pub min_bucket_eigs: Vec<f64>,
}

impl RobustEstimate {
    pub fn min_bucket_eig(&self) -> f64 {
        self.min_bucket_eigs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn robust_sysid(data: &Dataset, config: &EstimatorConfig) -> Result<RobustEstimate, EstimatorError> {
    let n = data.len();
    let k = choose_bucket_count(config, n)?;
    let plan = plan_buckets(n, k)?;
    let trajectories = data.trajectories();

    let fits = (0..plan.k)
        .into_par_iter()
        .map(|j| {
            let pairs = trajectories[plan.bucket(j)]
                .iter()
                .map(|t| (t.last_input(), t.last_output()));
            fit(pairs, config.ols_eps, true).map_err(|e| match e {
                EstimatorError::SingularCovariance { source, .. } => {
                    EstimatorError::SingularCovariance { bucket: Some(j), source }
                }
                other => other,
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        // Report the lowest-indexed failure regardless of scheduling.
        .collect::<Result<Vec<_>, _>>()?;

    let (bucket_estimates, min_bucket_eigs): (Vec<Mat>, Vec<f64>) =
        fits.into_iter().map(|f| (f.estimate, f.min_cov_eig)).unzip();

    let gm = geometric_median(&bucket_estimates, &config.median_options())?;
    let a_hat = if data.system_dim() == 1 {
        let values: Vec<f64> = bucket_estimates.iter().map(|m| m[(0, 0)]).collect();
        let med = scalar_median(&values).expect("at least one bucket");
        Mat::from_rows(&[[med]]).expect("finite median")
    } else {
        gm.point
    };

    Ok(RobustEstimate {
        a_hat,
        bucket_estimates,
        gm_iterations: gm.iterations,
        gm_converged: gm.converged,
        plan,
        min_bucket_eigs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{ExcitationOnly, NoiseSpec};
    use crate::sim::{collect, LtiSystem, Trajectory};

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn plan_examples() {
        let p = plan_buckets(12, 3).unwrap();
        assert_eq!((p.m, p.dropped()), (4, 0));
        let p = plan_buckets(13, 3).unwrap();
        assert_eq!((p.m, p.dropped()), (4, 1));
        assert_eq!(p.assignments(), vec![0..4, 4..8, 8..12]);
        assert_eq!(plan_buckets(5, 5).unwrap().m, 1);
        assert!(matches!(
            plan_buckets(3, 4),
            Err(EstimatorError::TooFewTrajectories { k: 4, n: 3 })
        ));
    }

    #[test]
    fn bucket_rules() {
        let scalar = EstimatorConfig::with_delta(EstimatorMode::Scalar, 0.01);
        assert_eq!(choose_bucket_count(&scalar, 10_000).unwrap(), 37);
        let vector = EstimatorConfig::with_delta(EstimatorMode::Vector, 0.01);
        assert_eq!(choose_bucket_count(&vector, 10_000).unwrap(), 148);
        let corrupted = EstimatorConfig::with_delta(EstimatorMode::Corrupted { eta: 0.01 }, 0.1);
        assert_eq!(choose_bucket_count(&corrupted, 1000).unwrap(), 234);
        assert!(matches!(
            choose_bucket_count(&vector, 100),
            Err(EstimatorError::InfeasiblePlan { k: 148, n: 100 })
        ));
        let explicit = EstimatorConfig::with_buckets(7);
        assert_eq!(choose_bucket_count(&explicit, 7).unwrap(), 7);
        assert!(choose_bucket_count(&EstimatorConfig::default(), 10).is_err());
        assert!(choose_bucket_count(&EstimatorConfig::with_delta(EstimatorMode::Vector, 1.0), 10).is_err());
    }

    #[test]
    fn ols_examples() {
        let (x1, y1, x2, y2) = (v(&[1.0]), v(&[2.0]), v(&[2.0]), v(&[3.0]));
        let est = ols_bucket([(&x1, &y1), (&x2, &y2)], 1e-14).unwrap();
        assert!((est[(0, 0)] - 1.6).abs() < 1e-15);

        let (x3, y3) = (v(&[3.0]), v(&[5.0]));
        let est = ols_bucket([(&x1, &y1), (&x2, &y2), (&x3, &y3)], 1e-14).unwrap();
        assert!((est[(0, 0)] - 23.0 / 14.0).abs() < 1e-15);

        let a = Mat::from_rows(&[[0.3, -1.0], [2.0, 0.5]]).unwrap();
        let xs = [v(&[1.0, 0.0]), v(&[0.3, 2.0]), v(&[-1.0, 1.0])];
        let ys: Vec<Vector> = xs.iter().map(|x| a.mat_vec(x).unwrap()).collect();
        let est = ols_bucket(xs.iter().zip(&ys), 1e-14).unwrap();
        assert!(est.max_abs_diff(&a) < 1e-10);

        let line = [v(&[1.0, 2.0]), v(&[-2.0, -4.0]), v(&[0.5, 1.0])];
        let err = ols_bucket(line.iter().zip(&ys), 1e-14).unwrap_err();
        assert!(matches!(err, EstimatorError::SingularCovariance { .. }));
    }

    #[test]
    fn noiseless_recovery_and_single_bucket() {
        let a = Mat::from_rows(&[[0.6, 0.2], [-0.3, 0.1]]).unwrap();
        let sys = LtiSystem::new(a.clone()).unwrap();
        let noise = ExcitationOnly(NoiseSpec::gaussian(1.0).unwrap());
        let data = collect(&sys, &noise, 4, 40, 3);
        let est = robust_sysid(&data, &EstimatorConfig::with_buckets(4)).unwrap();
        assert!(est.a_hat.max_abs_diff(&a) < 1e-10);
        assert!(pooled_ols(&data, 1e-14).unwrap().max_abs_diff(&a) < 1e-10);

        let noisy = collect(&sys, &NoiseSpec::gaussian(1.0).unwrap(), 4, 40, 3);
        let one = robust_sysid(&noisy, &EstimatorConfig::with_buckets(1)).unwrap();
        assert_eq!(one.a_hat, pooled_ols(&noisy, 1e-14).unwrap());
        assert_eq!(one.bucket_estimates.len(), 1);
    }

    #[test]
    fn singular_bucket_is_tagged() {
        // Bucket 0 only ever sees x_T on the first axis; bucket 1 is regular.
        let traj = |x: [f64; 2]| {
            Trajectory::from_parts(vec![v(&[0.0, 0.0]), v(&x), v(&[0.5 * x[0], 0.5 * x[1]])], vec![v(&x), v(&[0.0, 0.0])])
        };
        let data = Dataset::from_parts(
            vec![traj([1.0, 0.0]), traj([2.0, 0.0]), traj([1.0, 0.0]), traj([0.0, 1.0])],
            2,
            1,
            Vec::new(),
        );
        let err = robust_sysid(&data, &EstimatorConfig::with_buckets(2)).unwrap_err();
        assert!(matches!(err, EstimatorError::SingularCovariance { bucket: Some(0), .. }), "{err:?}");
        let regular = Dataset::from_parts(data.trajectories()[2..].to_vec(), 2, 1, Vec::new());
        assert!(robust_sysid(&regular, &EstimatorConfig::with_buckets(1)).is_ok());
    }

    #[test]
    fn scalar_path_uses_exact_median() {
        let sys = LtiSystem::new(Mat::from_rows(&[[0.8]]).unwrap()).unwrap();
        let data = collect(&sys, &NoiseSpec::student(5.0, 1.0).unwrap(), 6, 400, 12);
        for k in [7, 8] {
            let est = robust_sysid(&data, &EstimatorConfig::with_buckets(k)).unwrap();
            let values: Vec<f64> = est.bucket_estimates.iter().map(|m| m[(0, 0)]).collect();
            assert_eq!(est.a_hat[(0, 0)], scalar_median(&values).unwrap());
            let gm = geometric_median(&est.bucket_estimates, &MedianOptions::default()).unwrap();
            let scale: f64 = values.iter().map(|x| x.abs()).sum();
            let gap = (median_objective(&est.a_hat, &est.bucket_estimates) - gm.objective).abs();
            assert!(gap <= 1e-10 * scale, "k={k} gap={gap}");
        }
    }

    #[test]
    fn config_json_defaults() {
        let c: EstimatorConfig = serde_json::from_str(r#"{"delta":0.05,"mode":"corrupted","eta":0.1}"#).unwrap();
        assert_eq!(c.mode, EstimatorMode::Corrupted { eta: 0.1 });
        assert_eq!(c.effective_k_constant(), 32.0);
        assert_eq!(c.gm_max_iter, 10_000);
    }
}
