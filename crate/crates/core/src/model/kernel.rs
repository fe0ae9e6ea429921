use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_asymmetry, symmetrize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Euclidean,
    Mahalanobis,
    Custom,
}

/// n x n genetic relationship matrix with its kernel tag and the divisor
/// (1/m, 1/|S| or 1/k) applied at construction.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    matrix: DMatrix<f64>,
    kind: KernelKind,
    divisor: usize,
}

impl KernelMatrix {
    pub(crate) fn new_unchecked(mut matrix: DMatrix<f64>, kind: KernelKind, divisor: usize) -> Self {
        symmetrize(&mut matrix);
        KernelMatrix {
            matrix,
            kind,
            divisor,
        }
    }

    /// Wrap a user-supplied kernel. The matrix must be square and symmetric
    /// up to rounding; it is symmetrized exactly on ingestion.
    pub fn custom(matrix: DMatrix<f64>, divisor: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::invalid("kernel matrix must be square and nonempty"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel matrix"));
        }
        if max_asymmetry(&matrix) > 1e-8 * max_abs(&matrix).max(1.0) {
            return Err(Error::invalid("kernel matrix is not symmetric"));
        }
        Ok(Self::new_unchecked(matrix, KernelKind::Custom, divisor))
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn divisor(&self) -> usize {
        self.divisor
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Numerical PSD check: smallest eigenvalue must be above
    /// -1e-8 * largest. Returns (min, max) eigenvalues.
    pub fn validate_psd(&self) -> Result<(f64, f64)> {
        let eig = self.matrix.symmetric_eigenvalues();
        let min = eig.min();
        let max = eig.max();
        if min < -1e-8 * max.max(0.0) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
                max_eigenvalue: max,
            });
        }
        Ok((min, max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn custom_kernel_validation() {
        let ok = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        assert!(KernelMatrix::custom(ok, 1).is_ok());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 1.0]);
        assert!(KernelMatrix::custom(bad, 1).is_err());
        let rect = DMatrix::from_row_slice(1, 2, &[1.0, 0.3]);
        assert!(KernelMatrix::custom(rect, 1).is_err());
    }

    #[test]
    fn psd_check_flags_indefinite() {
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let k = KernelMatrix::custom(indef, 1).unwrap();
        assert!(k.validate_psd().is_err());
    }
}
