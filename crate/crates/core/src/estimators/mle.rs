use crate::error::{Error, Result};
use crate::estimators::cache::ProfileLikelihoodCache;
use crate::estimators::se::asymptotic_from_cache;
use crate::kernels::WhitenedDesign;
use crate::model::{HeritabilityEstimate, KernelMatrix, PhenotypeVector};
use crate::optim::scan_then_golden;

/// Options for the profiled 1-D likelihood search.
#[derive(Debug, Clone, Copy)]
pub struct MleOptions {
    /// Search bounds for the signal-to-noise ratio eta2.
    pub eta2_bounds: (f64, f64),
    /// Absolute tolerance of the golden-section refinement in log eta2.
    pub tol_log_eta2: f64,
    /// Points in the coarse scan that brackets the golden-section stage.
    pub coarse_grid: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            eta2_bounds: (1e-6, 1e6),
            tol_log_eta2: 1e-8,
            coarse_grid: 64,
        }
    }
}

/// Relative distance from an eta2 bound below which the fit is flagged.
const BOUNDARY_REL: f64 = 1e-3;

/// Gaussian MLE of (sigma_e2, eta2) for y ~ N(0, sigma_e2 (eta2 K + I)) with
/// a unit-diagonal-convention GRM K; returns h2 = eta2/(1+eta2).
///
/// The noise variance is profiled out in closed form and the remaining 1-D
/// problem in log eta2 is solved by a coarse scan plus golden-section
/// refinement on the spectral cache (each evaluation O(n)).
pub fn mle_single_kernel(
    y: &PhenotypeVector,
    kernel: &KernelMatrix,
    opts: &MleOptions,
) -> Result<HeritabilityEstimate> {
    let cache = ProfileLikelihoodCache::from_kernel(y, kernel)?;
    maximize_profile(&cache, opts)
}

/// Whitened-design maximum likelihood: identical machinery applied to the
/// kernel (1/k) W W^T. With the Identity projection this coincides with the
/// Mahalanobis-kernel MLE; with a Subset projection it estimates the
/// heritability attributable to that subset.
pub fn c_heritability_mle(
    y: &PhenotypeVector,
    design: &WhitenedDesign,
    opts: &MleOptions,
) -> Result<HeritabilityEstimate> {
    let cache = ProfileLikelihoodCache::from_whitened(y, design)?;
    let mut est = maximize_profile(&cache, opts)?;
    let ratio = design.k() as f64 / design.n() as f64;
    // the consistency theory excludes k/n -> 1; flag, do not alter
    est.kn_ratio_flag = (ratio - 1.0).abs() < 0.05;
    Ok(est)
}

fn maximize_profile(
    cache: &ProfileLikelihoodCache,
    opts: &MleOptions,
) -> Result<HeritabilityEstimate> {
    let (lam_min, lam_max) = cache.lambda_range();
    if !(lam_max.is_finite() && lam_min.is_finite()) {
        return Err(Error::NonFinite("kernel spectrum"));
    }
    // flat ridge: K proportional to I makes (sigma_e2, eta2) jointly
    // unidentifiable (the likelihood depends on sigma_e2 (1 + eta2) only)
    if lam_max - lam_min <= 1e-10 * lam_max.abs().max(1.0) {
        return Err(Error::NonIdentifiable(
            "kernel spectrum is constant; only sigma_e2 (1 + eta2) is identified",
        ));
    }
    let (lo, hi) = opts.eta2_bounds;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(format!("bad eta2 bounds ({lo}, {hi})")));
    }
    let (t_opt, neg_obj, evals) = scan_then_golden(
        |t| -cache.profiled_objective(t.exp()),
        lo.ln(),
        hi.ln(),
        opts.coarse_grid,
        opts.tol_log_eta2,
    );
    let eta2 = t_opt.exp();
    let sigma2 = cache.profiled_sigma2(eta2);
    let loglik = -neg_obj;
    if !loglik.is_finite() || !sigma2.is_finite() {
        return Err(Error::NonFinite("profiled likelihood"));
    }
    let mut est = HeritabilityEstimate::from_eta2(eta2, sigma2, evals, loglik);
    est.boundary_flag = eta2 <= lo * (1.0 + BOUNDARY_REL) || eta2 >= hi * (1.0 - BOUNDARY_REL);
    let av = asymptotic_from_cache(cache, eta2, sigma2);
    if !av.degenerate && av.se_h2.is_finite() {
        est.se = Some(av.se_h2);
    }
    Ok(est)
}
