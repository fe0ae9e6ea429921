use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::MafVector;

/// Raw allele counts in {0,1,2}, n individuals by m SNPs, together with the
/// MAFs used to generate (or later standardize) them.
#[derive(Debug, Clone)]
pub struct RawGenotypeMatrix {
    counts: DMatrix<u8>,
    mafs: MafVector,
}

impl RawGenotypeMatrix {
    pub fn new(counts: DMatrix<u8>, mafs: MafVector) -> Result<Self> {
        if counts.ncols() != mafs.len() {
            return Err(Error::DimensionMismatch {
                context: "raw genotypes vs MAF vector",
                expected: counts.ncols(),
                found: mafs.len(),
            });
        }
        if let Some(bad) = counts.iter().find(|&&c| c > 2) {
            return Err(Error::invalid(format!(
                "allele counts must be 0, 1 or 2; found {bad}"
            )));
        }
        Ok(RawGenotypeMatrix { counts, mafs })
    }

    pub fn n(&self) -> usize {
        self.counts.nrows()
    }

    pub fn m(&self) -> usize {
        self.counts.ncols()
    }

    pub fn counts(&self) -> &DMatrix<u8> {
        &self.counts
    }

    pub fn mafs(&self) -> &MafVector {
        &self.mafs
    }
}

/// Standardized genotype design: z_ij = (f_ij - 2 p_j) / sqrt(2 p_j (1 - p_j)).
#[derive(Debug, Clone)]
pub struct GenotypeMatrix {
    z: DMatrix<f64>,
}

impl GenotypeMatrix {
    /// Wrap an already-standardized design.
    pub fn from_standardized(z: DMatrix<f64>) -> Result<Self> {
        if z.nrows() == 0 || z.ncols() == 0 {
            return Err(Error::invalid("genotype matrix must be nonempty"));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("genotype matrix"));
        }
        Ok(GenotypeMatrix { z })
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn m(&self) -> usize {
        self.z.ncols()
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Copy of the columns indexed by `idx` (ascending).
    pub fn subset_columns(&self, idx: &[usize]) -> DMatrix<f64> {
        self.z.select_columns(idx.iter())
    }
}

/// Standardize raw counts with the given (population) MAFs. No centering
/// across individuals is applied: 2 p_j is the center.
pub fn standardize(raw: &RawGenotypeMatrix, p: &MafVector) -> Result<GenotypeMatrix> {
    if raw.m() != p.len() {
        return Err(Error::DimensionMismatch {
            context: "standardize: genotype columns vs MAF length",
            expected: raw.m(),
            found: p.len(),
        });
    }
    let (n, m) = (raw.n(), raw.m());
    let mut z = DMatrix::zeros(n, m);
    for j in 0..m {
        let pj = p.get(j);
        let denom = (2.0 * pj * (1.0 - pj)).sqrt();
        let center = 2.0 * pj;
        for i in 0..n {
            z[(i, j)] = (raw.counts()[(i, j)] as f64 - center) / denom;
        }
    }
    GenotypeMatrix::from_standardized(z)
}

/// Standardize with MAFs estimated from the sample itself. Columns whose
/// estimated frequency exceeds 0.5 are recoded to the minor allele
/// (f -> 2 - f) before standardizing; monomorphic columns are rejected.
///
/// Returns the design together with the estimated MAFs actually used.
pub fn standardize_with_sample_mafs(
    raw: &RawGenotypeMatrix,
) -> Result<(GenotypeMatrix, MafVector)> {
    let (n, m) = (raw.n(), raw.m());
    let mut counts = raw.counts().clone();
    let mut p = Vec::with_capacity(m);
    for j in 0..m {
        let total: u64 = (0..n).map(|i| counts[(i, j)] as u64).sum();
        let mut freq = total as f64 / (2.0 * n as f64);
        if freq == 0.0 || freq == 1.0 {
            return Err(Error::invalid(format!(
                "SNP {j} is monomorphic in the sample; cannot standardize with sample MAFs"
            )));
        }
        if freq > 0.5 {
            for i in 0..n {
                counts[(i, j)] = 2 - counts[(i, j)];
            }
            freq = 1.0 - freq;
        }
        p.push(freq);
    }
    let mafs = MafVector::new(p)?;
    let recoded = RawGenotypeMatrix::new(counts, mafs.clone())?;
    let z = standardize(&recoded, &mafs)?;
    Ok((z, mafs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn raw(counts: Vec<u8>, n: usize, m: usize, p: Vec<f64>) -> RawGenotypeMatrix {
        RawGenotypeMatrix::new(
            DMatrix::from_row_slice(n, m, &counts),
            MafVector::new(p).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn standardize_formula_endpoints() {
        // f = 2, p = 0.5: (2 - 1)/sqrt(0.5) = sqrt(2)
        let r = raw(vec![2], 1, 1, vec![0.5]);
        let z = standardize(&r, r.mafs()).unwrap();
        assert_relative_eq!(z.z()[(0, 0)], 2f64.sqrt(), epsilon = 1e-15);
        // f = 2 p exactly (p = 0.5, f = 1) -> 0
        let r = raw(vec![1], 1, 1, vec![0.5]);
        let z = standardize(&r, r.mafs()).unwrap();
        assert_relative_eq!(z.z()[(0, 0)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn standardize_matches_elementwise_oracle() {
        let p = vec![0.2, 0.45];
        let r = raw(vec![0, 1, 2, 2, 1, 0], 3, 2, p.clone());
        let z = standardize(&r, r.mafs()).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let f = r.counts()[(i, j)] as f64;
                let expect = (f - 2.0 * p[j]) / (2.0 * p[j] * (1.0 - p[j])).sqrt();
                assert_eq!(z.z()[(i, j)], expect);
            }
        }
    }

    #[test]
    fn rejects_bad_counts_and_dims() {
        assert!(RawGenotypeMatrix::new(
            DMatrix::from_row_slice(1, 1, &[3u8]),
            MafVector::new(vec![0.3]).unwrap()
        )
        .is_err());
        let r = raw(vec![0, 1], 1, 2, vec![0.3, 0.3]);
        let wrong_p = MafVector::new(vec![0.3]).unwrap();
        assert!(standardize(&r, &wrong_p).is_err());
    }

    proptest::proptest! {
        #[test]
        fn standardize_matches_formula_everywhere(
            counts in proptest::collection::vec(0u8..=2, 12),
            raw_p in proptest::collection::vec(0.01f64..=0.5, 4),
        ) {
            let r = RawGenotypeMatrix::new(
                DMatrix::from_row_slice(3, 4, &counts),
                MafVector::new(raw_p.clone()).unwrap(),
            )
            .unwrap();
            let z = standardize(&r, r.mafs()).unwrap();
            for i in 0..3 {
                for j in 0..4 {
                    let f = counts[i * 4 + j] as f64;
                    let p = raw_p[j];
                    let expect = (f - 2.0 * p) / (2.0 * p * (1.0 - p)).sqrt();
                    proptest::prop_assert_eq!(z.z()[(i, j)], expect);
                }
            }
        }
    }

    #[test]
    fn sample_maf_standardization_recodes_major_alleles() {
        // column 0: mostly 2s -> freq > 0.5 -> recoded
        let r = raw(vec![2, 0, 2, 1, 1, 1], 3, 2, vec![0.5, 0.5]);
        let (z, p) = standardize_with_sample_mafs(&r).unwrap();
        assert!(p.get(0) <= 0.5 && p.get(0) > 0.0);
        assert_eq!(z.n(), 3);
        // monomorphic column rejected
        let r = raw(vec![0, 0, 0], 3, 1, vec![0.1]);
        assert!(standardize_with_sample_mafs(&r).is_err());
    }
}
