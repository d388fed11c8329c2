//! Rollouts of `x_{t+1} = A x_t + w_t` from the zero state, multi-trajectory
//! collection, and strong-contamination adversaries.

mod io;

use std::collections::BTreeSet;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matlib::{frobenius_norm, mat_mul, Mat, MatError, Vector};
use crate::noise::{NoiseSource, SeededRng};

pub use io::{read_dataset, read_dataset_from, write_dataset, write_dataset_to, DatasetIoError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("state-transition matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("corruption fraction must lie in [0, 0.5), got {0}")]
    InvalidEta(f64),
    #[error("corruption matrix is {got}x{got} but the system has dimension {expected}")]
    CorruptionShape { expected: usize, got: usize },
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// Linear time-invariant system `x_{t+1} = A x_t + w_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat", into = "Mat")]
pub struct LtiSystem {
    a: Mat,
}

impl LtiSystem {
    pub fn new(a: Mat) -> Result<Self, SimError> {
        if !a.is_square() {
            return Err(SimError::NotSquare(a.rows(), a.cols()));
        }
        Ok(Self { a })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    fn step(&self, x: &Vector, w: &[f64]) -> Vector {
        let mut next = self.a.mat_vec(x).expect("state dimension matches system");
        for (v, n) in next.as_mut_slice().iter_mut().zip(w) {
            *v += n;
        }
        next
    }
}

impl TryFrom<Mat> for LtiSystem {
    type Error = SimError;
    fn try_from(a: Mat) -> Result<Self, SimError> {
        Self::new(a)
    }
}

impl From<LtiSystem> for Mat {
    fn from(s: LtiSystem) -> Mat {
        s.a
    }
}

/// One rollout: `states[0..=T+1]` with `states[0] = 0`, and the noise draws
/// `noise[0..=T]` that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Vector>,
    noise: Vec<Vector>,
}

impl Trajectory {
    pub(crate) fn from_parts(states: Vec<Vector>, noise: Vec<Vector>) -> Self {
        debug_assert!(states.len() >= 3 && noise.len() + 1 == states.len());
        Self { states, noise }
    }

    pub fn horizon(&self) -> usize {
        self.states.len() - 2
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    /// The recorded draws `w_0, …, w_T`.
    pub fn noise(&self) -> &[Vector] {
        &self.noise
    }

    /// `x_T`, the regressor used by the estimators.
    pub fn last_input(&self) -> &Vector {
        &self.states[self.states.len() - 2]
    }

    /// `x_{T+1}`, the response used by the estimators.
    pub fn last_output(&self) -> &Vector {
        &self.states[self.states.len() - 1]
    }
}

/// `N` independent trajectories sharing dimension and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    trajectories: Vec<Trajectory>,
    system_dim: usize,
    horizon: usize,
    corrupted_indices: Vec<usize>,
}

impl Dataset {
    pub(crate) fn from_parts(
        trajectories: Vec<Trajectory>,
        system_dim: usize,
        horizon: usize,
        corrupted_indices: Vec<usize>,
    ) -> Self {
        Self {
            trajectories,
            system_dim,
            horizon,
            corrupted_indices,
        }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Which trajectories an adversary replaced. Bookkeeping for experiments;
    /// estimators never read it.
    pub fn corrupted_indices(&self) -> &[usize] {
        &self.corrupted_indices
    }

    /// `(x_T, x_{T+1})` for every trajectory, in index order.
    pub fn last_pairs(&self) -> impl Iterator<Item = (&Vector, &Vector)> + '_ {
        self.trajectories
            .iter()
            .map(|t| (t.last_input(), t.last_output()))
    }
}

pub fn simulate_trajectory<N: NoiseSource + ?Sized>(
    sys: &LtiSystem,
    noise: &N,
    horizon: usize,
    rng: &mut SeededRng,
) -> Trajectory {
    assert!(horizon >= 1, "horizon must be at least 1");
    let d = sys.dim();
    let mut states = Vec::with_capacity(horizon + 2);
    let mut draws = Vec::with_capacity(horizon + 1);
    states.push(Vector::zeros(d));
    for step in 0..=horizon {
        let mut w = Vector::zeros(d);
        noise.fill(step, horizon, rng, w.as_mut_slice());
        let next = sys.step(&states[step], w.as_slice());
        states.push(next);
        draws.push(w);
    }
    Trajectory {
        states,
        noise: draws,
    }
}

/// Generates `n` rollouts; trajectory `i` is driven by
/// `SeededRng::new(root_seed).child(i)`.
pub fn collect<N: NoiseSource + ?Sized>(
    sys: &LtiSystem,
    noise: &N,
    horizon: usize,
    n: usize,
    root_seed: u64,
) -> Dataset {
    assert!(n >= 1, "at least one trajectory is required");
    let root = SeededRng::new(root_seed);
    let trajectories = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.child(i as u64);
            simulate_trajectory(sys, noise, horizon, &mut rng)
        })
        .collect();
    Dataset {
        trajectories,
        system_dim: sys.dim(),
        horizon,
        corrupted_indices: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum CorruptionStrategy {
    /// Every state `x_t`, `t ≥ 1`, becomes `magnitude · t · e₁`.
    GrossOutlier { magnitude: f64 },
    /// Every state becomes `-gamma · x_t`.
    SignFlipScale { gamma: f64 },
    /// The recorded noise is replayed through `a_bad` instead of `A`.
    TargetedFakeA { a_bad: Mat },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub eta: f64,
    #[serde(flatten)]
    pub strategy: CorruptionStrategy,
}

impl CorruptionSpec {
    pub fn new(eta: f64, strategy: CorruptionStrategy) -> Result<Self, SimError> {
        let spec = Self { eta, strategy };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..0.5).contains(&self.eta) {
            return Err(SimError::InvalidEta(self.eta));
        }
        Ok(())
    }

    /// `⌊η N⌋`, with a 1e-9 allowance so decimal fractions such as
    /// `0.29 · 100` count 29 rather than 28.
    pub fn corrupted_count(&self, n: usize) -> usize {
        ((self.eta * n as f64) + 1e-9).floor() as usize
    }
}

fn corrupt_one(traj: &Trajectory, strategy: &CorruptionStrategy) -> Trajectory {
    let d = traj.dim();
    match strategy {
        CorruptionStrategy::GrossOutlier { magnitude } => {
            let states = (0..traj.states.len())
                .map(|t| Vector::basis(d, 0).scale(magnitude * t as f64))
                .collect();
            Trajectory {
                states,
                noise: traj.noise.clone(),
            }
        }
        CorruptionStrategy::SignFlipScale { gamma } => Trajectory {
            states: traj.states.iter().map(|x| x.scale(-gamma)).collect(),
            noise: traj.noise.clone(),
        },
        CorruptionStrategy::TargetedFakeA { a_bad } => {
            let fake = LtiSystem { a: a_bad.clone() };
            let mut states = Vec::with_capacity(traj.states.len());
            states.push(Vector::zeros(d));
            for (t, w) in traj.noise.iter().enumerate() {
                let next = fake.step(&states[t], w.as_slice());
                states.push(next);
            }
            Trajectory {
                states,
                noise: traj.noise.clone(),
            }
        }
    }
}

/// Replaces exactly `⌊η N⌋` trajectories chosen uniformly without
/// replacement. Untouched trajectories are copied bit for bit.
pub fn corrupt(data: &Dataset, spec: &CorruptionSpec, rng: &mut SeededRng) -> Result<Dataset, SimError> {
    spec.validate()?;
    if let CorruptionStrategy::TargetedFakeA { a_bad } = &spec.strategy {
        if a_bad.shape() != (data.system_dim, data.system_dim) {
            return Err(SimError::CorruptionShape {
                expected: data.system_dim,
                got: a_bad.rows(),
            });
        }
    }
    let n = data.len();
    let count = spec.corrupted_count(n);
    let mut out = data.clone();
    if count == 0 {
        return Ok(out);
    }
    let chosen = index::sample(rng, n, count).into_vec();
    for &i in &chosen {
        out.trajectories[i] = corrupt_one(&data.trajectories[i], &spec.strategy);
    }
    let merged: BTreeSet<usize> = data
        .corrupted_indices
        .iter()
        .copied()
        .chain(chosen)
        .collect();
    out.corrupted_indices = merged.into_iter().collect();
    Ok(out)
}

/// Haar-distributed orthogonal matrix as a product of `d` Householder
/// reflections with Gaussian normals.
pub fn random_orthogonal(d: usize, rng: &mut SeededRng) -> Mat {
    let gauss = crate::noise::NoiseSpec::Gaussian { sigma: 1.0 };
    let mut q = Mat::identity(d);
    for _ in 0..d {
        let v = gauss.sample_vector(d, rng);
        let nv = v.norm();
        if nv == 0.0 {
            continue;
        }
        let u = v.scale(1.0 / nv);
        let h = &Mat::identity(d) - &Mat::outer(&u, &u).scale(2.0);
        q = &q * &h;
    }
    q
}

/// A non-normal stable matrix with spectral radius exactly `radius`:
/// `Q U Qᵀ` where `U` is upper triangular with diagonal entries of modulus at
/// most `radius` (the first equal to it) and Gaussian strictly-upper entries.
pub fn random_stable_matrix(d: usize, radius: f64, rng: &mut SeededRng) -> Mat {
    use rand::Rng;
    let gauss = crate::noise::NoiseSpec::Gaussian { sigma: 0.5 };
    let mut u = Mat::zeros(d, d);
    for i in 0..d {
        u[(i, i)] = if i == 0 {
            radius
        } else {
            radius * rng.random_range(-1.0..1.0)
        };
        for j in (i + 1)..d {
            u[(i, j)] = gauss.sample_scalar(rng);
        }
    }
    let q = random_orthogonal(d, rng);
    let qu = mat_mul(&q, &u).expect("square");
    mat_mul(&qu, &q.transpose()).expect("square")
}

/// `Σ_{t=0}^{T-1} A^t n_t` with `n_t = w_{T-(t+1)}`: the closed form of `x_T`
/// in terms of the recorded noise.
pub fn reconstruct_last_input(sys: &LtiSystem, traj: &Trajectory) -> Vector {
    let t_h = traj.horizon();
    let d = sys.dim();
    let mut acc = Vector::zeros(d);
    let mut power = Mat::identity(d);
    for t in 0..t_h {
        let n_t = &traj.noise[t_h - (t + 1)];
        acc = &acc + &power.mat_vec(n_t).expect("dimension");
        power = &power * sys.a();
    }
    acc
}

/// Relative distance of two systems in Frobenius norm, for diagnostics.
pub fn relative_gap(a: &Mat, b: &Mat) -> f64 {
    frobenius_norm(&(a - b)) / frobenius_norm(a).max(f64::MIN_POSITIVE)
}
