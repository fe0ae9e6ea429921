use crate::error::{Error, Result};

/// Minor-allele frequencies, one per SNP, each in (0, 0.5].
#[derive(Debug, Clone, PartialEq)]
pub struct MafVector {
    p: Vec<f64>,
}

impl MafVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("MAF vector must be nonempty"));
        }
        for (j, &v) in p.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 || v > 0.5 {
                return Err(Error::invalid(format!(
                    "MAF at index {j} is {v}; frequencies must lie in (0, 0.5(]"
                )));
            }
        }
        Ok(MafVector { p })
    }

    /// Check the adjacency constraint |p_j - p_{j+1}| < max_diff used by the
    /// copula genotype simulator.
    pub fn validate_adjacent(&self, max_diff: f64) -> Result<()> {
        for j in 0..self.p.len().saturating_sub(1) {
            let d = (self.p[j] - self.p[j + 1]).abs();
            if d >= max_diff {
                return Err(Error::invalid(format!(
                    "adjacent MAF gap {d:.4} at index {j} exceeds {max_diff}"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, j: usize) -> f64 {
        self.p[j]
    }
}
