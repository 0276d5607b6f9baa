//! Minimal dense linear algebra for small symmetric systems.
//!
//! The simulator only ever solves systems of a few dozen unknowns (normal
//! equations for quadratic optima, covariance factorizations for Monte Carlo
//! sampling), so a plain row-major matrix with textbook Cholesky and cyclic
//! Jacobi routines is all that is needed.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_to(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    /// Row `r` as a slice.
    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `self * v` for a square or rectangular matrix.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| dot(self.row(r), v))
            .collect()
    }
}

/// Plain dot product. Inputs here are at most a few thousand elements, where
/// naive summation is comfortably inside the tolerances used by the tests.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Squared Euclidean distance between two equal-length slices.
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Cholesky factor `L` (lower triangular, `L·Lᵀ = a`) of a symmetric
/// positive-definite matrix, or `None` if a pivot collapses.
fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// Solves `a·x = b` for symmetric positive-definite `a` via Cholesky.
/// A failed factorization is reported as a conditioning error carrying the
/// smallest eigenvalue of `a`.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::Dimension(alloc::format!(
            "solve_spd: matrix {}x{} vs rhs {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let l = cholesky(a).ok_or_else(|| {
        let (eigs, _) = jacobi_eigen(a);
        let min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        Error::Conditioning {
            min_eigenvalue: min,
        }
    })?;
    // forward substitution: L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.get(i, k) * y[k];
        }
        y[i] = sum / l.get(i, i);
    }
    // back substitution: Lᵀ x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l.get(k, i) * x[k];
        }
        x[i] = sum / l.get(i, i);
    }
    Ok(x)
}

/// Eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi
/// rotations. Returns `(eigenvalues, V)` with eigenvectors in the columns of
/// `V`, unsorted. Converges quadratically; 50 sweeps is far beyond what the
/// d ≤ 64 matrices here need.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..50 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let eigs = (0..n).map(|i| m.get(i, i)).collect();
    (eigs, v)
}

/// Factor `A` with `A·Aᵀ = sigma` for a symmetric positive-semidefinite
/// matrix, built from the eigendecomposition so that exactly singular
/// covariances (e.g. rank-one noise) are handled. Eigenvalues below
/// `-1e-8·max` are rejected as non-PSD; small negative round-off is clamped
/// to zero.
pub fn psd_sqrt_factor(sigma: &Matrix) -> Result<Matrix> {
    let n = sigma.rows();
    if sigma.cols() != n {
        return Err(Error::Dimension(alloc::format!(
            "psd_sqrt_factor: {}x{} not square",
            sigma.rows(),
            sigma.cols()
        )));
    }
    let (eigs, v) = jacobi_eigen(sigma);
    let max_eig = eigs.iter().copied().fold(0.0_f64, f64::max);
    let floor = -1e-8 * max_eig.max(1e-300);
    // Eigenvalues within rounding noise of zero — either sign — are treated
    // as an exact null space, so rank-deficient inputs get factors whose
    // range is genuinely rank-deficient rather than polluted by sqrt-inflated
    // noise (√1e-17 ≈ 3e-9 would otherwise leak into every product).
    let noise = 1e-12 * max_eig.max(1e-300);
    let mut a = Matrix::zeros(n, n);
    for (j, &lambda) in eigs.iter().enumerate() {
        if lambda < floor {
            return Err(Error::Conditioning {
                min_eigenvalue: lambda,
            });
        }
        let root = if lambda <= noise { 0.0 } else { lambda.sqrt() };
        for i in 0..n {
            a.set(i, j, v.get(i, j) * root);
        }
    }
    Ok(a)
}
