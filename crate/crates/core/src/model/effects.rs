use nalgebra::DVector;

use crate::error::{Error, Result};

/// Fixed genetic effect vector with its causal support and the per-index
/// variances it was drawn from.
#[derive(Debug, Clone)]
pub struct EffectVector {
    u: DVector<f64>,
    causal: Vec<usize>,
    psi: Vec<f64>,
    sigma_g2: f64,
}

impl EffectVector {
    /// `causal` must be strictly ascending and index into `u`; `psi` holds
    /// the draw variance for each causal index; entries of `u` off the causal
    /// set must be exactly zero. The psi values must sum to `sigma_g2`.
    pub fn new(u: DVector<f64>, causal: Vec<usize>, psi: Vec<f64>, sigma_g2: f64) -> Result<Self> {
        if causal.len() != psi.len() {
            return Err(Error::DimensionMismatch {
                context: "causal set vs psi",
                expected: causal.len(),
                found: psi.len(),
            });
        }
        if !causal.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("causal set must be strictly ascending"));
        }
        if let Some(&last) = causal.last() {
            if last >= u.len() {
                return Err(Error::invalid(format!(
                    "causal index {last} out of range for m = {}",
                    u.len()
                )));
            }
        }
        if psi.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("psi entries must be finite and nonnegative"));
        }
        let mut inside = vec![false; u.len()];
        for &j in &causal {
            inside[j] = true;
        }
        for j in 0..u.len() {
            if !inside[j] && u[j] != 0.0 {
                return Err(Error::invalid(format!(
                    "effect at non-causal index {j} is {}; must be exactly zero",
                    u[j]
                )));
            }
        }
        let total: f64 = psi.iter().sum();
        if sigma_g2 > 0.0 && (total - sigma_g2).abs() > 1e-12 * sigma_g2 {
            return Err(Error::invalid(format!(
                "psi sums to {total}, configured genetic variance is {sigma_g2}"
            )));
        }
        Ok(EffectVector {
            u,
            causal,
            psi,
            sigma_g2,
        })
    }

    /// All-zero effects (empty causal set, zero genetic variance).
    pub fn zeros(m: usize) -> Self {
        EffectVector {
            u: DVector::zeros(m),
            causal: Vec::new(),
            psi: Vec::new(),
            sigma_g2: 0.0,
        }
    }

    /// Merge two effect vectors with disjoint causal sets (used to assemble
    /// partitioned designs with separate variance budgets per subset).
    pub fn combine(&self, other: &EffectVector) -> Result<EffectVector> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                context: "combine effect vectors",
                expected: self.len(),
                found: other.len(),
            });
        }
        let mut merged: Vec<(usize, f64)> = self
            .causal
            .iter()
            .zip(&self.psi)
            .chain(other.causal.iter().zip(&other.psi))
            .map(|(&j, &p)| (j, p))
            .collect();
        merged.sort_by_key(|&(j, _)| j);
        if merged.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("causal sets overlap; cannot combine"));
        }
        let (causal, psi): (Vec<_>, Vec<_>) = merged.into_iter().unzip();
        EffectVector::new(
            &self.u + &other.u,
            causal,
            psi,
            self.sigma_g2 + other.sigma_g2,
        )
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn causal_set(&self) -> &[usize] {
        &self.causal
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn sigma_g2(&self) -> f64 {
        self.sigma_g2
    }
}
