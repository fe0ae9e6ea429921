use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::cache::ProfileLikelihoodCache;
use crate::kernels::WhitenedDesign;

/// Trace functionals and the Delta-method standard error of h2 for a
/// whitened-design fit. With I = (1/k) W W^T and J = eta2 I + I_n, the
/// scaled Fisher-information entries for (sigma2, eta2) are
///
///   iota_a = (1/(2 n sigma^{2(4-a)})) tr(I^{a-2} J^{2-a}),  a = 2, 3, 4,
///
/// (iota_2 = I_ss/n, iota_3 = I_se/n, iota_4 = I_ee/n). Profiling out the
/// nuisance sigma2 leaves
///
///   psi    = (iota_4 - iota_3^2 / iota_2)^{-1}  = Var(sqrt(n) eta2_hat),
///   se(h2) = sqrt(psi / ((1 + eta2)^4 n)).
///
/// Note the Schur complement eliminates sigma2, so psi is free of the noise
/// scale, as it must be: eta2_hat is invariant to rescaling y. (Taking the
/// complement the other way round, (iota_2 - iota_3^2/iota_4)^{-1}, yields
/// the variance of sigma2_hat instead and understates the spread of h2_hat
/// several-fold; the Monte Carlo calibration in the acceptance suite pins
/// the version here.)
///
/// `degenerate` is set when the trace ratio tr(I J^{-1})^2 / (n tr(I^2 J^{-2}))
/// reaches 1 (constant spectrum), where the variance blows up; `psi` and
/// `se_h2` are then infinite.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticVariance {
    pub iota_2: f64,
    pub iota_3: f64,
    pub iota_4: f64,
    pub psi: f64,
    pub se_h2: f64,
    pub degenerate: bool,
}

/// Asymptotic standard error of the whitened-design MLE at the fitted
/// (eta2, sigma2_perp). Traces are computed from the spectrum in O(n).
pub fn asymptotic_se(
    design: &WhitenedDesign,
    eta2_hat: f64,
    sigma2_perp_hat: f64,
) -> Result<AsymptoticVariance> {
    if !(eta2_hat >= 0.0) || !eta2_hat.is_finite() {
        return Err(Error::invalid(format!("eta2 must be >= 0; got {eta2_hat}")));
    }
    if !(sigma2_perp_hat > 0.0) || !sigma2_perp_hat.is_finite() {
        return Err(Error::invalid(format!(
            "sigma2 must be > 0; got {sigma2_perp_hat}"
        )));
    }
    let n = design.n();
    let k = design.k();
    let lambda: Vec<f64> = if k < n {
        let gram = design.w().transpose() * design.w() / k as f64;
        gram.symmetric_eigenvalues().iter().map(|l| l.max(0.0)).collect()
    } else {
        let kern = crate::kernels::grm_of_whitened(design);
        kern.symmetric_eigenvalues().iter().map(|l| l.max(0.0)).collect()
    };
    let null = n - lambda.len();
    Ok(from_spectrum(
        lambda.iter().copied(),
        null,
        n,
        eta2_hat,
        sigma2_perp_hat,
    ))
}

pub(crate) fn asymptotic_from_cache(
    cache: &ProfileLikelihoodCache,
    eta2: f64,
    sigma2: f64,
) -> AsymptoticVariance {
    from_spectrum(
        cache.lambda().iter().copied(),
        cache.null_count(),
        cache.n(),
        eta2,
        sigma2,
    )
}

fn from_spectrum(
    lambda: impl Iterator<Item = f64>,
    null_count: usize,
    n: usize,
    eta2: f64,
    sigma2: f64,
) -> AsymptoticVariance {
    let nf = n as f64;
    // zero eigenvalues contribute nothing to the iota_3/iota_4 sums
    let _ = null_count;
    let mut s3 = 0.0; // sum lambda / (eta2 lambda + 1)
    let mut s4 = 0.0; // sum lambda^2 / (eta2 lambda + 1)^2
    for l in lambda {
        let d = eta2 * l + 1.0;
        s3 += l / d;
        s4 += (l / d) * (l / d);
    }
    let iota_2 = 1.0 / (2.0 * sigma2 * sigma2);
    let iota_3 = s3 / (2.0 * nf * sigma2);
    let iota_4 = s4 / (2.0 * nf);
    let denom = iota_4 - iota_3 * iota_3 / iota_2;
    let degenerate = !(iota_2 > 0.0) || !(denom > 0.0) || !denom.is_finite();
    let psi = if degenerate { f64::INFINITY } else { 1.0 / denom };
    let se_h2 = if degenerate {
        f64::INFINITY
    } else {
        (psi / ((1.0 + eta2).powi(4) * nf)).sqrt()
    };
    AsymptoticVariance {
        iota_2,
        iota_3,
        iota_4,
        psi,
        se_h2,
        degenerate,
    }
}
