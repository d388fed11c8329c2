//! Geometric median of matrices under the Frobenius norm.
//!
//! Weiszfeld's fixed point `θ ← Σ_j (A_j / r_j) / Σ_j (1 / r_j)` with
//! `r_j = ‖θ − A_j‖_F`, started at the entrywise mean. When the iterate lands
//! within `anchor_eps` of one or more inputs the Vardi–Zhang step is used
//! instead, which either leaves the iterate where it is (if it is optimal) or
//! moves it off the data point in a descent direction.

use crate::matlib::{frobenius_norm, Mat};

use super::EstimatorError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub anchor_eps: f64,
}

impl Default for MedianOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            anchor_eps: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricMedian {
    pub point: Mat,
    pub iterations: usize,
    /// False when `max_iter` was exhausted; `point` is then the best iterate.
    pub converged: bool,
    pub objective: f64,
}

/// `Σ_j ‖θ − A_j‖_F`.
pub fn median_objective(theta: &Mat, points: &[Mat]) -> f64 {
    points.iter().map(|p| distance(theta, p)).sum()
}

fn distance(a: &Mat, b: &Mat) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn mean(points: &[Mat]) -> Mat {
    let (r, c) = points[0].shape();
    let inv = 1.0 / points.len() as f64;
    Mat::from_fn(r, c, |i, j| points.iter().map(|p| p[(i, j)]).sum::<f64>() * inv)
}

/// Optimality test at the data point `points[k]`: it minimises the objective
/// iff `‖Σ_{j: A_j ≠ A_k} (A_j − A_k)/‖A_j − A_k‖‖ ≤ multiplicity(A_k)`.
fn data_point_is_optimal(k: usize, points: &[Mat], anchor_eps: f64) -> bool {
    let anchor = &points[k];
    let (r, c) = anchor.shape();
    let mut pull = Mat::zeros(r, c);
    let mut multiplicity = 0.0;
    for p in points {
        let dist = distance(p, anchor);
        if dist <= anchor_eps {
            multiplicity += 1.0;
        } else {
            pull = &pull + &(p - anchor).scale(1.0 / dist);
        }
    }
    frobenius_norm(&pull) <= multiplicity
}

pub fn geometric_median(points: &[Mat], opts: &MedianOptions) -> Result<GeometricMedian, EstimatorError> {
    let first = points.first().ok_or(EstimatorError::EmptyInput)?;
    let shape = first.shape();
    if let Some(bad) = points.iter().find(|p| p.shape() != shape) {
        return Err(EstimatorError::ShapeMismatch {
            expected: shape,
            got: bad.shape(),
        });
    }

    let mut theta = mean(points);
    let spread = points.iter().map(|p| distance(p, &theta)).sum::<f64>() / points.len() as f64;
    let step_tol = opts.tol * spread;
    let (r, c) = shape;

    let mut best = theta.clone();
    let mut best_obj = median_objective(&theta, points);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let mut weighted = Mat::zeros(r, c);
        let mut weight_sum = 0.0;
        let mut pull = Mat::zeros(r, c);
        let mut multiplicity = 0.0;
        for p in points {
            let dist = distance(p, &theta);
            if dist <= opts.anchor_eps {
                multiplicity += 1.0;
                continue;
            }
            let w = 1.0 / dist;
            weighted = &weighted + &p.scale(w);
            weight_sum += w;
            pull = &pull + &(p - &theta).scale(w);
        }

        let next = if weight_sum == 0.0 {
            // Every input coincides with the iterate.
            theta.clone()
        } else {
            let t_bar = weighted.scale(1.0 / weight_sum);
            if multiplicity == 0.0 {
                t_bar
            } else {
                let pull_norm = frobenius_norm(&pull);
                if pull_norm <= multiplicity {
                    theta.clone()
                } else {
                    let lam = multiplicity / pull_norm;
                    &t_bar.scale(1.0 - lam) + &theta.scale(lam)
                }
            }
        };

        let step = distance(&next, &theta);
        theta = next;
        let obj = median_objective(&theta, points);
        if obj <= best_obj {
            best_obj = obj;
            best = theta.clone();
        }
        if step <= step_tol {
            converged = true;
            break;
        }
    }

    // Weiszfeld approaches a data-point minimiser only linearly; finish on the
    // point itself when the subgradient test says it is optimal.
    let nearest = points
        .iter()
        .enumerate()
        .map(|(k, p)| (k, distance(p, &best)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
        .expect("nonempty");
    if data_point_is_optimal(nearest, points, opts.anchor_eps) {
        let obj = median_objective(&points[nearest], points);
        if obj <= best_obj {
            best_obj = obj;
            best = points[nearest].clone();
        }
    }

    Ok(GeometricMedian {
        point: best,
        iterations,
        converged,
        objective: best_obj,
    })
}

/// Sample median of scalars; the lower of the two middle values for an even
/// count.
pub fn scalar_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[(sorted.len() - 1) / 2])
}
