use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{center, EffectVector, GenotypeMatrix, PhenotypeVector};

/// y = Z u + e with e ~ N(0, sigma_e2 I), centered on output.
///
/// With sigma_e2 = 0 no noise is drawn and the result is exactly center(Zu).
pub fn simulate_phenotype(
    z: &GenotypeMatrix,
    u: &EffectVector,
    sigma_e2: f64,
    rng: &mut impl Rng,
) -> Result<PhenotypeVector> {
    if z.m() != u.len() {
        return Err(Error::DimensionMismatch {
            context: "simulate_phenotype: genotype columns vs effect length",
            expected: z.m(),
            found: u.len(),
        });
    }
    if !(sigma_e2 >= 0.0) || !sigma_e2.is_finite() {
        return Err(Error::invalid(format!(
            "noise variance must be finite and >= 0; got {sigma_e2}"
        )));
    }
    let mut y = z.z() * u.u();
    if sigma_e2 > 0.0 {
        let sd = sigma_e2.sqrt();
        for i in 0..y.len() {
            let e: f64 = rng.sample(StandardNormal);
            y[i] += sd * e;
        }
    }
    center(y.as_slice())
}
