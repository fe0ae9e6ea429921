use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_asymmetry, symmetrize, SpdFactor};
use crate::stats::fnv1a64_f64s;

/// Relative eigenvalue floor: matrices whose smallest eigenvalue falls below
/// this fraction of the largest are rejected, since Sigma^{-1} and
/// Sigma^{-1/2} enter every Mahalanobis path.
pub const EIGENVALUE_FLOOR_REL: f64 = 1e-10;

const SYMMETRY_TOL_REL: f64 = 1e-8;

/// Population LD matrix: a symmetric positive-definite covariance of
/// standardized genotypes, stored block-diagonally with eagerly computed
/// symmetric square-root factorizations per block.
///
/// A general dense matrix is the single-block case; block structure is what
/// makes the simulated designs (many AR blocks) tractable at large m.
#[derive(Debug, Clone)]
pub struct LDMatrix {
    block_starts: Vec<usize>,
    blocks: Vec<LdBlock>,
    m: usize,
    eig_min: f64,
    eig_max: f64,
    fingerprint: u64,
}

#[derive(Debug, Clone)]
struct LdBlock {
    sigma: DMatrix<f64>,
    factor: SpdFactor,
}

#[derive(Clone, Copy)]
enum Factor {
    Sigma,
    Sqrt,
    InvSqrt,
}

impl LDMatrix {
    /// Build from a list of diagonal blocks.
    pub fn from_blocks(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("LD matrix needs at least one block"));
        }
        let mut built = Vec::with_capacity(blocks.len());
        let mut block_starts = Vec::with_capacity(blocks.len());
        let mut m = 0usize;
        let (mut eig_min, mut eig_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for (k, mut sigma) in blocks.into_iter().enumerate() {
            if sigma.nrows() != sigma.ncols() || sigma.nrows() == 0 {
                return Err(Error::invalid(format!(
                    "LD block {k} is {}x{}; blocks must be square and nonempty",
                    sigma.nrows(),
                    sigma.ncols()
                )));
            }
            let scale = max_abs(&sigma);
            if !scale.is_finite() {
                return Err(Error::NonFinite("LD matrix entries"));
            }
            if max_asymmetry(&sigma) > SYMMETRY_TOL_REL * scale.max(1.0) {
                return Err(Error::invalid(format!("LD block {k} is not symmetric")));
            }
            symmetrize(&mut sigma);
            // Per-block factor with only the sign check; the relative floor is
            // applied globally below so that small blocks cannot hide a bad
            // global spectrum.
            let factor = SpdFactor::new(&sigma, 0.0)?;
            eig_min = eig_min.min(factor.eigenvalues.min());
            eig_max = eig_max.max(factor.eigenvalues.max());
            block_starts.push(m);
            m += sigma.nrows();
            built.push(LdBlock { sigma, factor });
        }
        if eig_min <= EIGENVALUE_FLOOR_REL * eig_max {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: eig_min,
                max_eigenvalue: eig_max,
            });
        }
        let fingerprint = fnv1a64_f64s(
            std::iter::once(m as f64)
                .chain(built.iter().flat_map(|b| b.sigma.iter().copied().collect::<Vec<_>>())),
        );
        Ok(LDMatrix {
            block_starts,
            blocks: built,
            m,
            eig_min,
            eig_max,
            fingerprint,
        })
    }

    /// Build from a single dense symmetric matrix.
    pub fn from_dense(sigma: DMatrix<f64>) -> Result<Self> {
        Self::from_blocks(vec![sigma])
    }

    pub fn identity(m: usize) -> Self {
        Self::from_dense(DMatrix::identity(m, m)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Column/row range covered by block `k`.
    pub fn block_range(&self, k: usize) -> std::ops::Range<usize> {
        let start = self.block_starts[k];
        start..start + self.blocks[k].sigma.nrows()
    }

    pub fn block_sigma(&self, k: usize) -> &DMatrix<f64> {
        &self.blocks[k].sigma
    }

    /// Smallest and largest eigenvalue across all blocks.
    pub fn eigenvalue_range(&self) -> (f64, f64) {
        (self.eig_min, self.eig_max)
    }

    /// Content hash for provenance records.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (bi, li) = self.locate(i);
        let (bj, lj) = self.locate(j);
        if bi == bj {
            self.blocks[bi].sigma[(li, lj)]
        } else {
            0.0
        }
    }

    fn locate(&self, i: usize) -> (usize, usize) {
        debug_assert!(i < self.m);
        let b = match self.block_starts.binary_search(&i) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        (b, i - self.block_starts[b])
    }

    /// Assemble the full dense matrix. Intended for small m (file output,
    /// tests); the operational paths below stay blockwise.
    pub fn dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, self.m);
        for k in 0..self.blocks.len() {
            let r = self.block_range(k);
            out.view_mut((r.start, r.start), (r.len(), r.len()))
                .copy_from(&self.blocks[k].sigma);
        }
        out
    }

    fn block_factor(&self, k: usize, which: Factor) -> &DMatrix<f64> {
        match which {
            Factor::Sigma => &self.blocks[k].sigma,
            Factor::Sqrt => &self.blocks[k].factor.sqrt,
            Factor::InvSqrt => &self.blocks[k].factor.inv_sqrt,
        }
    }

    fn right_apply(&self, x: &DMatrix<f64>, which: Factor) -> DMatrix<f64> {
        assert_eq!(x.ncols(), self.m, "column count must match LD dimension");
        let mut out = DMatrix::zeros(x.nrows(), self.m);
        for k in 0..self.blocks.len() {
            let r = self.block_range(k);
            let prod = x.columns(r.start, r.len()) * self.block_factor(k, which);
            out.view_mut((0, r.start), (x.nrows(), r.len())).copy_from(&prod);
        }
        out
    }

    fn left_apply(&self, c: &DMatrix<f64>, which: Factor) -> DMatrix<f64> {
        assert_eq!(c.nrows(), self.m, "row count must match LD dimension");
        let mut out = DMatrix::zeros(self.m, c.ncols());
        for k in 0..self.blocks.len() {
            let r = self.block_range(k);
            let prod = self.block_factor(k, which) * c.rows(r.start, r.len());
            out.view_mut((r.start, 0), (r.len(), c.ncols())).copy_from(&prod);
        }
        out
    }

    /// X Sigma
    pub fn right_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.right_apply(x, Factor::Sigma)
    }

    /// X Sigma^{1/2}
    pub fn right_mul_sqrt(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.right_apply(x, Factor::Sqrt)
    }

    /// X Sigma^{-1/2}
    pub fn right_mul_inv_sqrt(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.right_apply(x, Factor::InvSqrt)
    }

    /// Sigma C
    pub fn mul_mat(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        self.left_apply(c, Factor::Sigma)
    }

    /// Sigma^{1/2} C
    pub fn sqrt_mul_mat(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        self.left_apply(c, Factor::Sqrt)
    }

    /// Sigma v
    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(self.m, 1, v.as_slice());
        DVector::from_column_slice(self.left_apply(&m, Factor::Sigma).as_slice())
    }

    /// Sigma^{1/2} v
    pub fn sqrt_mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(self.m, 1, v.as_slice());
        DVector::from_column_slice(self.left_apply(&m, Factor::Sqrt).as_slice())
    }

    /// v^T Sigma v
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        assert_eq!(v.len(), self.m);
        let mut acc = 0.0;
        for k in 0..self.blocks.len() {
            let r = self.block_range(k);
            let vb = v.rows(r.start, r.len());
            acc += (&self.blocks[k].sigma * vb).dot(&vb.clone_owned());
        }
        acc
    }

    /// Dense principal submatrix Sigma[idx, idx]; `idx` must be strictly
    /// ascending.
    pub fn principal_submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(idx.len(), idx.len());
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                out[(a, b)] = self.entry(ia, ib);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        &a * a.transpose() + DMatrix::identity(n, n)
    }

    #[test]
    fn rejects_asymmetric_and_singular() {
        let mut a = random_spd(5, 1);
        a[(0, 1)] += 1.0;
        assert!(LDMatrix::from_dense(a).is_err());

        let mut b = random_spd(5, 2);
        let col = b.column(0).clone_owned();
        b.set_column(4, &col);
        let row = b.row(0).clone_owned();
        b.set_row(4, &row);
        b[(4, 4)] = b[(0, 0)];
        assert!(matches!(
            LDMatrix::from_dense(b),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn factorization_identities() {
        let ld = LDMatrix::from_blocks(vec![random_spd(7, 3), random_spd(5, 4)]).unwrap();
        let dense = ld.dense();
        let eye = DMatrix::identity(12, 12);
        // sqrt * sqrt = sigma
        let sqrt = ld.sqrt_mul_mat(&eye);
        assert_relative_eq!(&sqrt * &sqrt, dense, epsilon = 1e-10 * max_abs(&ld.dense()));
        // inv_sqrt * sigma * inv_sqrt = I (Frobenius)
        let w = ld.right_mul_inv_sqrt(&ld.mul_mat(&eye).transpose());
        let back = ld.right_mul_inv_sqrt(&w).transpose();
        let err = (&back - &eye).norm();
        assert!(err < 1e-8, "whitening residual {err}");
    }

    #[test]
    fn blockwise_ops_match_dense() {
        let ld = LDMatrix::from_blocks(vec![random_spd(4, 5), random_spd(6, 6)]).unwrap();
        let dense = ld.dense();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = DMatrix::from_fn(3, 10, |_, _| rng.random::<f64>());
        assert_relative_eq!(ld.right_mul(&x), &x * &dense, epsilon = 1e-12);
        let c = DMatrix::from_fn(10, 2, |_, _| rng.random::<f64>());
        assert_relative_eq!(ld.mul_mat(&c), &dense * &c, epsilon = 1e-12);
        let v = DVector::from_fn(10, |_, _| rng.random::<f64>());
        assert_relative_eq!(ld.quad_form(&v), (&dense * &v).dot(&v), epsilon = 1e-12);
        let idx = [0usize, 2, 5, 9];
        let sub = ld.principal_submatrix(&idx);
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                assert_eq!(sub[(a, b)], dense[(ia, ib)]);
            }
        }
    }

    #[test]
    fn fingerprint_distinguishes_content() {
        let a = LDMatrix::from_dense(random_spd(5, 8)).unwrap();
        let b = LDMatrix::from_dense(random_spd(5, 9)).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        let a2 = LDMatrix::from_dense(a.dense()).unwrap();
        assert_eq!(a.fingerprint(), a2.fingerprint());
    }
}
