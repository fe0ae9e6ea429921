//! Larger estimator behaviors that need simulated ensembles: the
//! consistency trend of the whitened-design MLE and the spectral-cache
//! equivalence across design shapes.

use herit_core::estimators::{c_heritability_mle, MleOptions};
use herit_core::kernels::whitened_design;
use herit_core::model::ProjectionSpec;
use herit_core::sim::{
    build_block_ar_sigma, simulate_effects, simulate_gaussian_genotypes, simulate_phenotype,
    ArBlockSpec, CausalConfig, CausalMode, EffectVarianceRule, RngStream,
};
use herit_core::truth::true_h2_fixed;

/// Median absolute error of h2_C over replicates at one (n, m = 2n) scale.
fn median_abs_error(n: usize, replicates: usize, seed: u64) -> f64 {
    let m = 2 * n;
    let spec = ArBlockSpec::new(m / 10, vec![0.5, 0.2, 0.6, 0.3, 0.4, 0.5, 0.2, 0.6, 0.3, 0.4])
        .unwrap();
    let sigma = build_block_ar_sigma(&spec).unwrap();
    let cfg = CausalConfig {
        mode: CausalMode::All,
        variance_rule: EffectVarianceRule::Equal,
    };
    let mut errors: Vec<f64> = (0..replicates)
        .map(|r| {
            let mut rng = RngStream::replicate(seed, r as u64).rng();
            let z = simulate_gaussian_genotypes(n, &sigma, &mut rng);
            let u = simulate_effects(&cfg, m, None, 0.5, &mut rng).unwrap();
            let y = simulate_phenotype(&z, &u, 0.5, &mut rng).unwrap();
            let w = whitened_design(&z, &sigma, &ProjectionSpec::Identity).unwrap();
            let est = c_heritability_mle(&y, &w, &MleOptions::default()).unwrap();
            let truth = true_h2_fixed(&u, &sigma, 0.5).unwrap();
            (est.h2_hat - truth).abs()
        })
        .collect();
    errors.sort_by(|a, b| a.total_cmp(b));
    errors[errors.len() / 2]
}

#[test]
fn whitened_mle_error_shrinks_with_n() {
    // k/n = 2 fixed, Gaussian design; the median |h2_hat - h2| must fall
    // monotonically across n = 200, 500, 1000
    let e200 = median_abs_error(200, 20, 9100);
    let e500 = median_abs_error(500, 20, 9101);
    let e1000 = median_abs_error(1000, 20, 9102);
    assert!(
        e200 > e500 && e500 > e1000,
        "median errors not decreasing: {e200:.4} / {e500:.4} / {e1000:.4}"
    );
}
