//! Small dense linear-algebra helpers shared across modules: symmetric
//! square roots, symmetry checks, and condition estimates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigendecomposition-backed factorizations of a symmetric positive-definite
/// matrix. Square roots are the symmetric ones (U f(L) U^T).
#[derive(Debug, Clone)]
pub struct SpdFactor {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub sqrt: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
}

impl SpdFactor {
    /// Factor a symmetric matrix, rejecting it when the smallest eigenvalue
    /// falls below `floor_rel` times the largest.
    pub fn new(sym: &DMatrix<f64>, floor_rel: f64) -> Result<Self> {
        let eig = sym.clone().symmetric_eigen();
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::NonFinite("eigendecomposition"));
        }
        if min <= floor_rel * max || max <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
                max_eigenvalue: max,
            });
        }
        let u = &eig.eigenvectors;
        let sqrt_vals = eig.eigenvalues.map(|l| l.sqrt());
        let inv_sqrt_vals = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
        let sqrt = scaled_congruence(u, &sqrt_vals);
        let inv_sqrt = scaled_congruence(u, &inv_sqrt_vals);
        Ok(SpdFactor {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
            sqrt,
            inv_sqrt,
        })
    }
}

/// U diag(d) U^T, symmetrized exactly.
fn scaled_congruence(u: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = u.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[j];
    }
    let mut out = scaled * u.transpose();
    symmetrize(&mut out);
    out
}

/// Largest absolute difference between a matrix and its transpose.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Force exact symmetry by averaging with the transpose.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

/// Solve A x = b for symmetric positive-definite A via Cholesky, with an
/// infinity-norm condition estimate. Errors when A is not SPD or the
/// condition estimate exceeds `cond_limit`.
pub struct SpdSolver {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    pub cond_estimate: f64,
}

impl SpdSolver {
    pub fn new(a: DMatrix<f64>, cond_limit: f64, context: &'static str) -> Result<Self> {
        let norm_a = inf_norm(&a);
        let chol = a.cholesky().ok_or(Error::RankDeficient { context })?;
        let inv = chol.inverse();
        let cond = norm_a * inf_norm(&inv);
        if !cond.is_finite() || cond > cond_limit {
            return Err(Error::IllConditioned {
                context,
                cond,
            });
        }
        Ok(SpdSolver {
            chol,
            cond_estimate: cond,
        })
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }
}

fn inf_norm(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        let mut row = 0.0;
        for j in 0..a.ncols() {
            row += a[(i, j)].abs();
        }
        worst = worst.max(row);
    }
    worst
}
