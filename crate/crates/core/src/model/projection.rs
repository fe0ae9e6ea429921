use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Linear projection of the genotype vector whose explained variance is the
/// estimand: the identity (total heritability), a coordinate subset
/// (partitioned heritability), or a general full-column-rank matrix.
#[derive(Debug, Clone)]
pub enum ProjectionSpec {
    Identity,
    Subset(Vec<usize>),
    General(DMatrix<f64>),
}

impl ProjectionSpec {
    /// Coordinate-selection projection onto the (0-based, strictly ascending)
    /// index set `s` within `m` SNPs.
    pub fn subset(s: Vec<usize>, m: usize) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::invalid("subset must be nonempty"));
        }
        if !s.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid(
                "subset indices must be strictly ascending and duplicate-free",
            ));
        }
        if *s.last().unwrap() >= m {
            return Err(Error::invalid(format!(
                "subset index {} out of range for m = {m}",
                s.last().unwrap()
            )));
        }
        Ok(ProjectionSpec::Subset(s))
    }

    /// General m x k projection; requires full column rank (smallest singular
    /// value above 1e-10 of the largest).
    pub fn general(c: DMatrix<f64>) -> Result<Self> {
        if c.nrows() == 0 || c.ncols() == 0 || c.ncols() > c.nrows() {
            return Err(Error::invalid(
                "projection matrix must be m x k with 1 <= k <= m",
            ));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("projection matrix"));
        }
        let gram = c.transpose() * &c;
        let eig = gram.symmetric_eigenvalues();
        let min = eig.min().max(0.0);
        let max = eig.max();
        // singular values are sqrt of Gram eigenvalues
        if min.sqrt() <= 1e-10 * max.sqrt() {
            return Err(Error::RankDeficient {
                context: "projection matrix",
            });
        }
        Ok(ProjectionSpec::General(c))
    }

    /// Rank of the projection given the ambient SNP count.
    pub fn rank(&self, m: usize) -> usize {
        match self {
            ProjectionSpec::Identity => m,
            ProjectionSpec::Subset(s) => s.len(),
            ProjectionSpec::General(c) => c.ncols(),
        }
    }

    /// Short description for provenance records.
    pub fn describe(&self) -> String {
        match self {
            ProjectionSpec::Identity => "identity".to_string(),
            ProjectionSpec::Subset(s) => format!("subset({})", s.len()),
            ProjectionSpec::General(c) => format!("general({}x{})", c.nrows(), c.ncols()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_validation() {
        assert!(ProjectionSpec::subset(vec![0, 2, 5], 6).is_ok());
        assert!(ProjectionSpec::subset(vec![], 6).is_err());
        assert!(ProjectionSpec::subset(vec![0, 0], 6).is_err());
        assert!(ProjectionSpec::subset(vec![2, 1], 6).is_err());
        assert!(ProjectionSpec::subset(vec![0, 6], 6).is_err());
    }

    #[test]
    fn general_rank_check() {
        let ok = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(ProjectionSpec::general(ok).is_ok());
        let dup = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 0.5, 1.0]);
        assert!(matches!(
            ProjectionSpec::general(dup),
            Err(Error::RankDeficient { .. })
        ));
    }
}
