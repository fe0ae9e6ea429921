//! Genetic relationship matrices and the whitened designs behind
//! projection heritability.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::model::{GenotypeMatrix, KernelKind, KernelMatrix, LDMatrix, ProjectionSpec};

/// K = (1/m) Z Z^T, the standard GWAS GRM.
pub fn euclidean_grm(z: &GenotypeMatrix) -> KernelMatrix {
    let m = z.m();
    let k = z.z() * z.z().transpose() / m as f64;
    KernelMatrix::new_unchecked(k, KernelKind::Euclidean, m)
}

/// K = (1/m) Z Sigma^{-1} Z^T, computed as (1/m) W W^T through the whitened
/// design W = Z Sigma^{-1/2}. The 1/m divisor keeps E[K_ii] = 1 under the
/// Gaussian design, matching the unit-diagonal GRM convention.
pub fn mahalanobis_grm(z: &GenotypeMatrix, sigma: &LDMatrix) -> Result<KernelMatrix> {
    let w = whitened_design(z, sigma, &ProjectionSpec::Identity)?;
    Ok(KernelMatrix::new_unchecked(
        grm_of_whitened(&w),
        KernelKind::Mahalanobis,
        z.m(),
    ))
}

/// (1/k) W W^T for a whitened design, symmetrized exactly so that every
/// consumer sees the same matrix bit for bit.
pub(crate) fn grm_of_whitened(w: &WhitenedDesign) -> DMatrix<f64> {
    let mut k = w.w() * w.w().transpose() / w.k() as f64;
    crate::linalg::symmetrize(&mut k);
    k
}

/// Whitened design W_C = Z C (C^T Sigma C)^{-1/2} (symmetric square root).
///
/// Under the Gaussian genotype design the rows of W_C are i.i.d. N(0, I_k).
#[derive(Debug, Clone)]
pub struct WhitenedDesign {
    w: DMatrix<f64>,
    k: usize,
    provenance: Option<Provenance>,
}

/// Where a whitened design came from: the projection summary and the content
/// hash of the LD matrix used to build it.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub projection: String,
    pub ld_fingerprint: u64,
}

impl WhitenedDesign {
    /// Wrap an externally built whitened matrix (no provenance).
    pub fn from_matrix(w: DMatrix<f64>) -> Result<Self> {
        if w.nrows() == 0 || w.ncols() == 0 {
            return Err(Error::invalid("whitened design must be nonempty"));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("whitened design"));
        }
        let k = w.ncols();
        Ok(WhitenedDesign {
            w,
            k,
            provenance: None,
        })
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    /// Rank of the projection (number of whitened columns).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }
}

/// Build W_C for any projection.
///
/// The orthonormal factor U_C is never materialized; the algebraically
/// equivalent form Z C (C^T Sigma C)^{-1/2} is used throughout, blockwise
/// where the LD matrix is block-diagonal:
///
/// - Identity: W = Z Sigma^{-1/2}
/// - Subset(S): W = Z_S (Sigma_{S,S})^{-1/2}
/// - General(C): W = (Z C) (C^T Sigma C)^{-1/2}
pub fn whitened_design(
    z: &GenotypeMatrix,
    sigma: &LDMatrix,
    c: &ProjectionSpec,
) -> Result<WhitenedDesign> {
    if z.m() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            context: "whitened_design: genotype columns vs LD dimension",
            expected: z.m(),
            found: sigma.dim(),
        });
    }
    let w = match c {
        ProjectionSpec::Identity => sigma.right_mul_inv_sqrt(z.z()),
        ProjectionSpec::Subset(s) => {
            // validate against this m even if the projection was built elsewhere
            if *s.last().unwrap() >= z.m() {
                return Err(Error::invalid("subset index out of range for design"));
            }
            subset_whitened(z, sigma, s)?
        }
        ProjectionSpec::General(cmat) => {
            if cmat.nrows() != z.m() {
                return Err(Error::DimensionMismatch {
                    context: "whitened_design: projection rows vs m",
                    expected: z.m(),
                    found: cmat.nrows(),
                });
            }
            let zc = z.z() * cmat;
            let gram = cmat.transpose() * sigma.mul_mat(cmat);
            let factor = SpdFactor::new(&gram, 1e-20).map_err(|_| Error::RankDeficient {
                context: "C^T Sigma C in whitened_design",
            })?;
            zc * factor.inv_sqrt
        }
    };
    let k = c.rank(z.m());
    Ok(WhitenedDesign {
        w,
        k,
        provenance: Some(Provenance {
            projection: c.describe(),
            ld_fingerprint: sigma.fingerprint(),
        }),
    })
}

/// Subset whitening exploits the block structure: Sigma_{S,S} is block
/// diagonal over the LD blocks, so each block's slice of S is whitened
/// independently. Agrees exactly with the dense computation.
fn subset_whitened(z: &GenotypeMatrix, sigma: &LDMatrix, s: &[usize]) -> Result<DMatrix<f64>> {
    let n = z.n();
    let mut w = DMatrix::zeros(n, s.len());
    let mut offset = 0usize;
    for b in 0..sigma.block_count() {
        let range = sigma.block_range(b);
        let local: Vec<usize> = s
            .iter()
            .copied()
            .filter(|&j| range.contains(&j))
            .collect();
        if local.is_empty() {
            continue;
        }
        let local_in_block: Vec<usize> = local.iter().map(|&j| j - range.start).collect();
        let sub = sigma.block_sigma(b).select_columns(local_in_block.iter());
        let sub = sub.select_rows(local_in_block.iter());
        let factor = SpdFactor::new(&sub, 1e-20).map_err(|_| Error::RankDeficient {
            context: "Sigma_{S,S} in whitened_design",
        })?;
        let zs = z.subset_columns(&local);
        w.view_mut((0, offset), (n, local.len()))
            .copy_from(&(zs * factor.inv_sqrt));
        offset += local.len();
    }
    debug_assert_eq!(offset, s.len());
    Ok(w)
}

/// Coordinate-selection projector onto `s` (0-based, ascending) in [0, m).
pub fn projection_for_subset(s: &[usize], m: usize) -> Result<ProjectionSpec> {
    ProjectionSpec::subset(s.to_vec(), m)
}
