use nalgebra::DVector;

use crate::error::{Error, Result};

/// Centered phenotype vector. Construction always subtracts the sample mean;
/// the models here carry no intercept.
#[derive(Debug, Clone)]
pub struct PhenotypeVector {
    y: DVector<f64>,
}

impl PhenotypeVector {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn norm_squared(&self) -> f64 {
        self.y.norm_squared()
    }
}

/// Center a raw outcome vector. Rejects constant vectors, for which every
/// downstream estimator is undefined.
pub fn center(y_raw: &[f64]) -> Result<PhenotypeVector> {
    if y_raw.len() < 2 {
        return Err(Error::invalid("phenotype vector needs at least 2 entries"));
    }
    if y_raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("phenotype vector"));
    }
    let n = y_raw.len() as f64;
    let mean = y_raw.iter().sum::<f64>() / n;
    let mut y = DVector::from_iterator(y_raw.len(), y_raw.iter().map(|v| v - mean));
    let scale = y_raw.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if y.norm_squared() <= n * (1e-14 * scale).powi(2) {
        return Err(Error::ZeroVariance);
    }
    // second pass drives the residual mean to the last ulp
    let resid = y.sum() / n;
    y.add_scalar_mut(-resid);
    Ok(PhenotypeVector { y })
}

impl PhenotypeVector {
    /// Center an owned vector (same contract as [`center`]).
    pub fn from_vector(y: DVector<f64>) -> Result<Self> {
        center(y.as_slice())
    }
}
