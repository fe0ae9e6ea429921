use serde::Serialize;

/// Result of a single-kernel or whitened-design heritability fit.
///
/// `h2_hat` and `eta2_hat` are tied by h2 = eta2/(1+eta2); both constructors
/// preserve that identity exactly. Likelihood fits always produce
/// `eta2_hat >= 0`; the moment (regression) estimator may produce estimates
/// outside [0, 1), reported unclipped with `range_flag` set.
#[derive(Debug, Clone, Serialize)]
pub struct HeritabilityEstimate {
    pub h2_hat: f64,
    /// Signal-to-noise ratio estimate.
    pub eta2_hat: f64,
    /// Noise variance estimate in phenotype-variance units.
    pub sigma2_hat: f64,
    /// Asymptotic standard error of h2_hat, when a spectrum-based formula
    /// applies and is non-degenerate.
    pub se: Option<f64>,
    /// Optimizer stopped within 1e-3 (relative) of an eta2 search bound.
    pub boundary_flag: bool,
    /// Point estimate fell outside [0, 1).
    pub range_flag: bool,
    /// Whitened fits with k/n within 5% of 1 are flagged; the asymptotic
    /// theory behind the standard error excludes that regime.
    pub kn_ratio_flag: bool,
    /// Objective evaluations spent by the optimizer.
    pub iterations: usize,
    /// Scaled profile log-likelihood at the optimum.
    pub log_likelihood: f64,
}

impl HeritabilityEstimate {
    pub(crate) fn from_eta2(
        eta2: f64,
        sigma2: f64,
        iterations: usize,
        log_likelihood: f64,
    ) -> Self {
        let h2 = eta2 / (1.0 + eta2);
        HeritabilityEstimate {
            h2_hat: h2,
            eta2_hat: eta2,
            sigma2_hat: sigma2,
            se: None,
            boundary_flag: false,
            range_flag: !(0.0..1.0).contains(&h2),
            kn_ratio_flag: false,
            iterations,
            log_likelihood,
        }
    }

    /// For moment estimators: keep the raw h2 (possibly outside [0,1)) and
    /// back out eta2 = h2/(1-h2), which round-trips exactly for any h2 != 1.
    pub(crate) fn from_unclipped_h2(h2: f64, sigma2: f64) -> Self {
        let eta2 = if h2 == 1.0 {
            f64::INFINITY
        } else {
            h2 / (1.0 - h2)
        };
        HeritabilityEstimate {
            h2_hat: h2,
            eta2_hat: eta2,
            sigma2_hat: sigma2,
            se: None,
            boundary_flag: false,
            range_flag: !(0.0..1.0).contains(&h2),
            kn_ratio_flag: false,
            iterations: 0,
            log_likelihood: f64::NAN,
        }
    }
}

/// Result of the two-variance-component maximum-likelihood fit.
#[derive(Debug, Clone, Serialize)]
pub struct TwoComponentEstimate {
    pub sigma2_s: f64,
    pub sigma2_sc: f64,
    pub sigma2_e: f64,
    /// Implied subset heritability sigma2_s / (sigma2_s + sigma2_sc + sigma2_e).
    pub h2_s: f64,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Components pinned at the 1e-8 lower bound.
    pub pinned_s: bool,
    pub pinned_sc: bool,
    pub pinned_e: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn eta2_h2_roundtrip(log_eta in -14.0f64..14.0) {
            let eta2 = log_eta.exp();
            let est = HeritabilityEstimate::from_eta2(eta2, 1.0, 0, 0.0);
            let back = est.eta2_hat / (1.0 + est.eta2_hat);
            prop_assert!((back - est.h2_hat).abs() <= 1e-12);
        }

        #[test]
        fn unclipped_roundtrip(h2 in -3.0f64..0.999) {
            let est = HeritabilityEstimate::from_unclipped_h2(h2, 1.0);
            let back = est.eta2_hat / (1.0 + est.eta2_hat);
            prop_assert!((back - h2).abs() <= 1e-12 * h2.abs().max(1.0));
            prop_assert_eq!(est.range_flag, !(0.0..1.0).contains(&h2));
        }
    }
}
