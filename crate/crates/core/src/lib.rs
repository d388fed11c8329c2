//! Robust identification of linear time-invariant systems from many short,
//! independent trajectories.
//!
//! The estimator splits `N` trajectories into `K` buckets, fits ordinary least
//! squares on each bucket's final transition `(x_T, x_{T+1})`, and returns the
//! geometric median of the bucket estimates. This keeps the error's
//! dependence on the failure probability logarithmic under heavy-tailed noise
//! and tolerates a small fraction of adversarially corrupted trajectories.
//!
//! ```
//! use robust_sysid::prelude::*;
//!
//! let sys = LtiSystem::new(Mat::identity(2).scale(0.5)).unwrap();
//! let noise = NoiseSpec::gaussian(1.0).unwrap();
//! let data = collect(&sys, &noise, 10, 2000, 7);
//! let est = robust_sysid(&data, &EstimatorConfig::with_delta(EstimatorMode::Vector, 0.05)).unwrap();
//! assert!(spectral_norm(&(&est.a_hat - sys.a()), 1e-12).unwrap() < 0.3);
//! ```

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod estimator;
pub mod harness;
pub mod matlib;
pub mod noise;
pub mod sim;

pub mod prelude {
    pub use crate::analysis::{theorem_bound, BoundConstants, BoundInputs, Theorem};
    pub use crate::estimator::{
        geometric_median, pooled_ols, robust_sysid, EstimatorConfig, EstimatorMode, MedianOptions, RobustEstimate,
    };
    pub use crate::harness::{run_experiment, ExperimentConfig, TrialRecord};
    pub use crate::matlib::{frobenius_norm, spectral_norm, Mat, Vector};
    pub use crate::noise::{NoiseSpec, SeededRng};
    pub use crate::sim::{collect, corrupt, CorruptionSpec, CorruptionStrategy, Dataset, LtiSystem};
}
