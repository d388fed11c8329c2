//! Small dense linear algebra.
//!
//! Every matrix in this crate is at most a few dozen rows wide, so the kernels
//! here are plain O(d³) loops over row-major storage: products, norms, a
//! Cholesky solve for symmetric positive definite systems and cyclic Jacobi
//! rotations for symmetric eigenvalues. Nothing in this module draws random
//! numbers.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cap on Jacobi sweeps before reporting non-convergence.
const MAX_JACOBI_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric (|m[{row},{col}] - m[{col},{row}]| = {gap:e})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e} below threshold {threshold:e})")]
    NotPositiveDefinite {
        pivot: usize,
        value: f64,
        threshold: f64,
    },
    #[error("{0} did not converge")]
    NonConvergence(&'static str),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

pub type Result<T> = std::result::Result<T, MatError>;

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Dense real column vector.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector {
    data: Vec<f64>,
}

fn check_finite(rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(MatError::NonFinite {
            row: k / cols.max(1),
            col: k % cols.max(1),
        }),
        None if rows == 0 || cols == 0 => Err(MatError::DimensionMismatch(format!(
            "matrix dimensions must be positive, got {rows}x{cols}"
        ))),
        None => Ok(()),
    }
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(MatError::DimensionMismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        check_finite(rows, cols, &data)?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(MatError::DimensionMismatch("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| 0.0)
    }

    pub fn identity(d: usize) -> Self {
        Self::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let d = diag.len();
        Self::from_fn(d, d, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    /// Outer product `x yᵀ`.
    pub fn outer(x: &Vector, y: &Vector) -> Self {
        Self::from_fn(x.dim(), y.dim(), |i, j| x[i] * y[j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn mat_vec(&self, x: &Vector) -> Result<Vector> {
        if x.dim() != self.cols {
            return Err(MatError::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                x.dim()
            )));
        }
        let data = (0..self.rows)
            .map(|i| self.row(i).iter().zip(x.as_slice()).map(|(a, b)| a * b).sum())
            .collect();
        Ok(Vector { data })
    }

    /// `selfᵀ self`, symmetrised exactly.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..self.rows).map(|k| self[(k, i)] * self[(k, j)]).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    /// Largest absolute difference between two equally shaped matrices.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(
            self.shape(),
            other.shape(),
            "elementwise operation on mismatched shapes"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

/// Panics on non-conformable shapes; use [`mat_mul`] for a checked product.
impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        mat_mul(self, rhs).expect("non-conformable matrix product")
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.cols)).finish()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Mat {
    type Error = MatError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<Mat> for Vec<Vec<f64>> {
    fn from(m: Mat) -> Self {
        m.to_rows()
    }
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        check_finite(1, data.len(), &data)?;
        Ok(Self { data })
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d > 0, "vector dimension must be positive");
        Self { data: vec![0.0; d] }
    }

    /// Unit vector `e_k` of length `d`.
    pub fn basis(d: usize, k: usize) -> Self {
        let mut v = Self::zeros(d);
        v.data[k] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "vector length mismatch");
        Vector {
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "vector length mismatch");
        Vector {
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.data).finish()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = MatError;
    fn try_from(data: Vec<f64>) -> Result<Self> {
        Self::new(data)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.data
    }
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.cols != b.rows {
        return Err(MatError::DimensionMismatch(format!(
            "{}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Mat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            let brow = b.row(k);
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    Ok(out)
}

pub fn frobenius_norm(m: &Mat) -> f64 {
    m.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest singular value, from the top eigenvalue of the smaller Gram matrix.
pub fn spectral_norm(m: &Mat, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(MatError::InvalidTolerance(tol));
    }
    let gram = if m.rows >= m.cols {
        m.gram()
    } else {
        m.transpose().gram()
    };
    let top = sym_eig_spectrum(&gram, tol)?[0];
    Ok(top.max(0.0).sqrt())
}

/// Eigenvalues of a symmetric matrix in descending order (cyclic Jacobi).
pub fn sym_eig_spectrum(m: &Mat, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(MatError::InvalidTolerance(tol));
    }
    if !m.is_square() {
        return Err(MatError::DimensionMismatch(format!(
            "eigenvalues of a non-square {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    let scale = m.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (m[(i, j)] - m[(j, i)]).abs();
            if gap > tol * scale {
                return Err(MatError::NotSymmetric { row: i, col: j, gap });
            }
        }
    }

    let mut a = m.clone();
    // Symmetrise so rotations act on an exactly symmetric matrix.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let total = frobenius_norm(&a);
    let target = tol * total;

    let off_diag = |a: &Mat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_diag(&a) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(MatError::NonConvergence("Jacobi eigenvalue sweep"));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
        converged = off_diag(&a) <= target;
    }

    let mut eig = a.diagonal();
    eig.sort_by(|x, y| y.total_cmp(x));
    Ok(eig)
}

/// Solves `X m = rhs` for symmetric positive definite `m` via Cholesky.
///
/// A pivot at or below `eps * trace(m) / d` is reported as
/// [`MatError::NotPositiveDefinite`].
pub fn solve_spd(m: &Mat, rhs: &Mat, eps: f64) -> Result<Mat> {
    if !m.is_square() {
        return Err(MatError::DimensionMismatch(format!(
            "Cholesky of a non-square {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let d = m.rows;
    if rhs.cols != d {
        return Err(MatError::DimensionMismatch(format!(
            "right-hand side has {} columns, system is {d}x{d}",
            rhs.cols
        )));
    }
    let threshold = eps * m.trace() / d as f64;

    let mut l = Mat::zeros(d, d);
    for j in 0..d {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > threshold) || pivot <= 0.0 {
            return Err(MatError::NotPositiveDefinite {
                pivot: j,
                value: pivot,
                threshold,
            });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..d {
            let mut s = 0.5 * (m[(i, j)] + m[(j, i)]);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }

    // Each row x of X satisfies m xᵀ = rᵀ.
    let mut out = Mat::zeros(rhs.rows, d);
    let mut work = vec![0.0; d];
    for r in 0..rhs.rows {
        for i in 0..d {
            let mut s = rhs[(r, i)];
            for k in 0..i {
                s -= l[(i, k)] * work[k];
            }
            work[i] = s / l[(i, i)];
        }
        for i in (0..d).rev() {
            let mut s = work[i];
            for k in (i + 1)..d {
                s -= l[(k, i)] * out[(r, k)];
            }
            out[(r, i)] = s / l[(i, i)];
        }
    }
    Ok(out)
}
