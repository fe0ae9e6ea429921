use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::LDMatrix;

/// Block-diagonal AR(1) LD specification: `rhos.len()` blocks, each
/// `block_size` x `block_size` with ij-entry rho^{|i-j|}.
#[derive(Debug, Clone, PartialEq)]
pub struct ArBlockSpec {
    pub block_size: usize,
    pub rhos: Vec<f64>,
}

impl ArBlockSpec {
    pub fn new(block_size: usize, rhos: Vec<f64>) -> Result<Self> {
        if block_size == 0 || rhos.is_empty() {
            return Err(Error::invalid("AR spec needs block_size >= 1 and >= 1 block"));
        }
        for &r in &rhos {
            if !r.is_finite() || r.abs() >= 1.0 {
                return Err(Error::invalid(format!(
                    "AR correlation must satisfy |rho| < 1; got {r}"
                )));
            }
        }
        Ok(ArBlockSpec { block_size, rhos })
    }

    pub fn m(&self) -> usize {
        self.block_size * self.rhos.len()
    }
}

/// Materialize the block-diagonal AR LD matrix described by `spec`.
pub fn build_block_ar_sigma(spec: &ArBlockSpec) -> Result<LDMatrix> {
    let blocks = spec
        .rhos
        .iter()
        .map(|&rho| ar_block(spec.block_size, rho))
        .collect();
    LDMatrix::from_blocks(blocks)
}

fn ar_block(size: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(size, size, |i, j| rho.powi((i as i32 - j as i32).abs()))
}
