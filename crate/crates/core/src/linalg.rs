//! Small dense linear-algebra helpers on top of nalgebra.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Solve a x = b for symmetric positive-definite a via Cholesky.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, at: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a.clone().cholesky().ok_or_else(|| Error::StrongConvexity {
        y: at.iter().copied().collect(),
    })?;
    Ok(chol.solve(b))
}

/// Matrix exponential by scaling and squaring with a Taylor core.
///
/// The argument is scaled until its norm is below 1/2, where the Taylor
/// series converges to machine precision in ~20 terms.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let b = a / 2f64.powi(squarings);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=80u32 {
        term = &term * &b / k as f64;
        sum += &term;
        if term.norm() <= 1e-18 * sum.norm() {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Least-squares representation of a d x d matrix in a basis of matrices,
/// via the precomputed pseudo-inverse of the vectorized basis.
pub struct BasisProjector {
    pinv: DMatrix<f64>,
    dim: usize,
    mat_dim: usize,
}

impl BasisProjector {
    pub fn new(basis: &[DMatrix<f64>]) -> Result<Self> {
        let dim = basis.len();
        let d = basis[0].nrows();
        let mut stacked = DMatrix::zeros(d * d, dim);
        for (j, e) in basis.iter().enumerate() {
            for r in 0..d {
                for c in 0..d {
                    stacked[(r * d + c, j)] = e[(r, c)];
                }
            }
        }
        // (A^T A)^-1 A^T; the basis matrices are linearly independent.
        let gram = stacked.transpose() * &stacked;
        let inv = gram
            .try_inverse()
            .ok_or_else(|| Error::InvalidAlgebra("basis matrices are linearly dependent".into()))?;
        Ok(Self {
            pinv: inv * stacked.transpose(),
            dim,
            mat_dim: d,
        })
    }

    /// Coordinates of `m` in the basis. The residual of the projection is
    /// returned alongside so callers can detect off-span matrices.
    pub fn coords(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let d = self.mat_dim;
        let mut v = DVector::zeros(d * d);
        for r in 0..d {
            for c in 0..d {
                v[r * d + c] = m[(r, c)];
            }
        }
        &self.pinv * v
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}
