use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{GenotypeMatrix, PhenotypeVector, TwoComponentEstimate};
use crate::optim::bfgs_maximize;

#[derive(Debug, Clone, Copy)]
pub struct TwoComponentOptions {
    pub max_iter: usize,
    /// Infinity-norm tolerance on the log-parameter gradient.
    pub grad_tol: f64,
    /// Lower bound for each variance component.
    pub lower_bound: f64,
    /// Apply the one-degree-of-freedom REML correction for the centering
    /// constraint (the model has no other fixed effects). Off by default:
    /// with zero fixed effects ML and REML differ only by this single
    /// constraint.
    pub reml_centering: bool,
}

impl Default for TwoComponentOptions {
    fn default() -> Self {
        TwoComponentOptions {
            max_iter: 200,
            grad_tol: 1e-3,
            lower_bound: 1e-8,
            reml_centering: false,
        }
    }
}

/// Maximum likelihood for the two-variance-component model
///
///   y ~ N(0, sigma2_S K_S + sigma2_Sc K_Sc + sigma2_e I),
///   K_S = Z_S Z_S^T / |S|,  K_Sc = Z_{S^c} Z_{S^c}^T / (m - |S|),
///
/// optimized over log-variances by BFGS with analytic gradients. Reports the
/// implied subset heritability h2_S = sigma2_S / (sigma2_S + sigma2_Sc + sigma2_e).
///
/// Non-convergence is reported through `converged` and `gradient_norm`
/// rather than as an error, so experiment harnesses can count it per
/// replicate.
pub fn ml_two_component(
    y: &PhenotypeVector,
    z: &GenotypeMatrix,
    s: &[usize],
    opts: &TwoComponentOptions,
) -> Result<TwoComponentEstimate> {
    let n = z.n();
    let m = z.m();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: "ml_two_component: phenotype vs genotype rows",
            expected: n,
            found: y.len(),
        });
    }
    if s.is_empty() || s.len() >= m {
        return Err(Error::invalid(
            "subset must be a proper nonempty subset of the SNPs",
        ));
    }
    if !s.windows(2).all(|w| w[0] < w[1]) || *s.last().unwrap() >= m {
        return Err(Error::invalid(
            "subset indices must be strictly ascending and within range",
        ));
    }
    let mut in_s = vec![false; m];
    for &j in s {
        in_s[j] = true;
    }
    let sc: Vec<usize> = (0..m).filter(|&j| !in_s[j]).collect();

    let zs = z.subset_columns(s);
    let zsc = z.subset_columns(&sc);
    let k_s = &zs * zs.transpose() / s.len() as f64;
    let k_sc = &zsc * zsc.transpose() / sc.len() as f64;

    let yv = y.as_vector().clone();
    let var_y = y.norm_squared() / n as f64;
    let lower = [opts.lower_bound.ln(); 3];

    // the likelihood can be multimodal on small or weakly identified
    // designs; run from an equal split and from a moment-regression start
    // and keep the better optimum
    let equal_start = [(var_y / 3.0).max(opts.lower_bound).ln(); 3];
    let mut starts = vec![equal_start];
    if let Some(m) = moment_start(&k_s, &k_sc, &yv, opts.lower_bound) {
        starts.push(m);
    }
    let mut out: Option<crate::optim::BfgsOutcome> = None;
    let mut total_iterations = 0usize;
    for x0 in starts {
        let eval = |x: &[f64]| evaluate(x, &k_s, &k_sc, &yv, opts.reml_centering);
        let run = bfgs_maximize(eval, &x0, &lower, opts.grad_tol, opts.max_iter);
        total_iterations += run.iterations;
        if out.as_ref().map_or(true, |best| run.value > best.value) {
            out = Some(run);
        }
    }
    let mut out = out.expect("at least one start");
    out.iterations = total_iterations;

    let sigma2_s = out.x[0].exp();
    let sigma2_sc = out.x[1].exp();
    let sigma2_e = out.x[2].exp();
    let pin = |v: f64| v <= opts.lower_bound * (1.0 + 1e-6);
    Ok(TwoComponentEstimate {
        sigma2_s,
        sigma2_sc,
        sigma2_e,
        h2_s: sigma2_s / (sigma2_s + sigma2_sc + sigma2_e),
        iterations: out.iterations,
        log_likelihood: out.value,
        converged: out.converged,
        gradient_norm: out.gradient_norm,
        pinned_s: pin(sigma2_s),
        pinned_sc: pin(sigma2_sc),
        pinned_e: pin(sigma2_e),
    })
}

/// Moment-regression starting point: the Frobenius projection of y y^T onto
/// span{K_S, K_Sc, I}, clamped to the feasible region (log coordinates).
fn moment_start(
    k_s: &DMatrix<f64>,
    k_sc: &DMatrix<f64>,
    y: &DVector<f64>,
    lower_bound: f64,
) -> Option<[f64; 3]> {
    let n = y.len();
    let dot = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
    };
    let tr = |a: &DMatrix<f64>| a.trace();
    let frob2 = |a: &DMatrix<f64>| -> f64 { a.iter().map(|x| x * x).sum() };
    let gram = nalgebra::Matrix3::new(
        frob2(k_s),
        dot(k_s, k_sc),
        tr(k_s),
        dot(k_s, k_sc),
        frob2(k_sc),
        tr(k_sc),
        tr(k_s),
        tr(k_sc),
        n as f64,
    );
    let ys = k_s * y;
    let ysc = k_sc * y;
    let rhs = nalgebra::Vector3::new(y.dot(&ys), y.dot(&ysc), y.norm_squared());
    let sol = gram.lu().solve(&rhs)?;
    Some([
        sol[0].max(lower_bound).ln(),
        sol[1].max(lower_bound).ln(),
        sol[2].max(lower_bound).ln(),
    ])
}

/// Log-likelihood and gradient in log-variance coordinates.
fn evaluate(
    x: &[f64],
    k_s: &DMatrix<f64>,
    k_sc: &DMatrix<f64>,
    y: &DVector<f64>,
    reml: bool,
) -> (f64, Vec<f64>) {
    let n = y.len();
    let (v_s, v_sc, v_e) = (x[0].exp(), x[1].exp(), x[2].exp());
    let mut v = k_s * v_s;
    v += k_sc * v_sc;
    for i in 0..n {
        v[(i, i)] += v_e;
    }
    let chol = match v.cholesky() {
        Some(c) => c,
        None => return (f64::NEG_INFINITY, vec![0.0; 3]),
    };
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let vinv = chol.inverse();
    let a = chol.solve(y);

    const LN_2PI: f64 = 1.837877066409345;
    let (value, py, trace_op): (f64, DVector<f64>, DMatrix<f64>) = if reml {
        // REML with the single centering constraint X = 1_n
        let ones = DVector::from_element(n, 1.0);
        let vinv1 = chol.solve(&ones);
        let denom = ones.dot(&vinv1);
        let py = &a - &vinv1 * (ones.dot(&a) / denom);
        let p = &vinv - (&vinv1 * vinv1.transpose()) / denom;
        let val = -0.5
            * ((n as f64 - 1.0) * LN_2PI + logdet + denom.ln() + y.dot(&py));
        (val, py, p)
    } else {
        let val = -0.5 * (n as f64 * LN_2PI + logdet + y.dot(&a));
        (val, a, vinv)
    };

    // d l / d sigma2_c = -1/2 [tr(P K_c) - (P y)^T K_c (P y)];
    // chain rule multiplies by sigma2_c for log coordinates
    let mut grad = Vec::with_capacity(3);
    for (kc, scale) in [(Some(k_s), v_s), (Some(k_sc), v_sc), (None, v_e)] {
        let (tr, quad) = match kc {
            Some(k) => {
                let tr = trace_op.iter().zip(k.iter()).map(|(a, b)| a * b).sum::<f64>();
                let kp = k * &py;
                (tr, py.dot(&kp))
            }
            None => (trace_op.trace(), py.norm_squared()),
        };
        grad.push(-0.5 * (tr - quad) * scale);
    }
    (value, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{mle_single_kernel, MleOptions};
    use crate::model::{KernelMatrix, LDMatrix};
    use crate::sim::{
        simulate_effects, simulate_gaussian_genotypes, simulate_phenotype, CausalConfig,
        CausalMode, EffectVarianceRule, RngStream,
    };

    fn toy_data(
        seed: u64,
        n: usize,
        m: usize,
        s_frac: f64,
        sigma_s2: f64,
        sigma_sc2: f64,
        sigma_e2: f64,
    ) -> (PhenotypeVector, GenotypeMatrix, Vec<usize>) {
        let mut rng = RngStream::new(seed, 0).rng();
        let sigma = LDMatrix::identity(m);
        let z = simulate_gaussian_genotypes(n, &sigma, &mut rng);
        let cut = (m as f64 * s_frac) as usize;
        let s: Vec<usize> = (0..cut).collect();
        let sc: Vec<usize> = (cut..m).collect();
        let e_s = simulate_effects(
            &CausalConfig {
                mode: CausalMode::Region(s.clone()),
                variance_rule: EffectVarianceRule::Equal,
            },
            m,
            None,
            sigma_s2,
            &mut rng,
        )
        .unwrap();
        let e_sc = simulate_effects(
            &CausalConfig {
                mode: CausalMode::Region(sc),
                variance_rule: EffectVarianceRule::Equal,
            },
            m,
            None,
            sigma_sc2,
            &mut rng,
        )
        .unwrap();
        let u = e_s.combine(&e_sc).unwrap();
        let y = simulate_phenotype(&z, &u, sigma_e2, &mut rng).unwrap();
        (y, z, s)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let (y, z, s) = toy_data(70, 40, 20, 0.5, 0.4, 0.3, 0.5);
        let zs = z.subset_columns(&s);
        let sc: Vec<usize> = (10..20).collect();
        let zsc = z.subset_columns(&sc);
        let k_s = &zs * zs.transpose() / 10.0;
        let k_sc = &zsc * zsc.transpose() / 10.0;
        let mut rng = RngStream::new(71, 0).rng();
        use rand::Rng;
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.5).collect();
            let (_, g) = evaluate(&x, &k_s, &k_sc, y.as_vector(), false);
            for d in 0..3 {
                let h = 1e-5;
                let mut xp = x.clone();
                xp[d] += h;
                let mut xm = x.clone();
                xm[d] -= h;
                let fp = evaluate(&xp, &k_s, &k_sc, y.as_vector(), false).0;
                let fm = evaluate(&xm, &k_s, &k_sc, y.as_vector(), false).0;
                let fd = (fp - fm) / (2.0 * h);
                let rel = (g[d] - fd).abs() / fd.abs().max(1.0);
                assert!(rel < 1e-5, "component {d}: analytic {} vs fd {fd}", g[d]);
            }
        }
    }

    #[test]
    fn reml_gradient_matches_finite_differences() {
        let (y, z, _) = toy_data(72, 35, 16, 0.5, 0.4, 0.2, 0.4);
        let s: Vec<usize> = (0..8).collect();
        let sc: Vec<usize> = (8..16).collect();
        let zs = z.subset_columns(&s);
        let zsc = z.subset_columns(&sc);
        let k_s = &zs * zs.transpose() / 8.0;
        let k_sc = &zsc * zsc.transpose() / 8.0;
        let x = [-0.5, -1.0, -0.3];
        let (_, g) = evaluate(&x, &k_s, &k_sc, y.as_vector(), true);
        for d in 0..3 {
            let h = 1e-5;
            let mut xp = x;
            xp[d] += h;
            let mut xm = x;
            xm[d] -= h;
            let fp = evaluate(&xp, &k_s, &k_sc, y.as_vector(), true).0;
            let fm = evaluate(&xm, &k_s, &k_sc, y.as_vector(), true).0;
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (g[d] - fd).abs() / fd.abs().max(1.0) < 1e-5,
                "reml component {d}: {} vs {fd}",
                g[d]
            );
        }
    }

    #[test]
    fn collapsed_component_matches_single_kernel() {
        // sigma_Sc2 = 0 generative: the Sc component collapses (up to
        // sampling noise in the ML estimate) and the implied h2_S tracks the
        // single-kernel MLE on K_S
        let mut sc_estimates = Vec::new();
        for seed in [73u64, 173, 273, 373] {
            let (y, z, s) = toy_data(seed, 150, 40, 0.5, 0.5, 0.0, 0.5);
            let est = ml_two_component(&y, &z, &s, &TwoComponentOptions::default()).unwrap();
            sc_estimates.push(est.sigma2_sc);
            let zs = z.subset_columns(&s);
            let k_s =
                KernelMatrix::custom(&zs * zs.transpose() / s.len() as f64, s.len()).unwrap();
            let single = mle_single_kernel(&y, &k_s, &MleOptions::default()).unwrap();
            assert!(
                (est.h2_s - single.h2_hat).abs() < 0.1,
                "seed {seed}: two-comp {} vs single-kernel {}",
                est.h2_s,
                single.h2_hat
            );
        }
        let mean_sc = sc_estimates.iter().sum::<f64>() / sc_estimates.len() as f64;
        assert!(mean_sc < 0.08, "mean sigma2_sc = {mean_sc} ({sc_estimates:?})");
    }

    #[test]
    fn matches_three_d_grid_oracle_on_tiny_instance() {
        let (y, z, s) = toy_data(74, 30, 12, 0.5, 0.4, 0.3, 0.6);
        let est = ml_two_component(&y, &z, &s, &TwoComponentOptions::default()).unwrap();
        assert!(est.converged, "gradient norm {}", est.gradient_norm);
        // two-stage 3-D grid over log variances
        let zs = z.subset_columns(&s);
        let sc: Vec<usize> = (6..12).collect();
        let zsc = z.subset_columns(&sc);
        let k_s = &zs * zs.transpose() / 6.0;
        let k_sc = &zsc * zsc.transpose() / 6.0;
        let stage = |lo: [f64; 3], hi: [f64; 3], pts: usize| -> [f64; 3] {
            let mut best = (f64::NEG_INFINITY, [0.0; 3]);
            for i in 0..pts {
                for j in 0..pts {
                    for k in 0..pts {
                        let x = [
                            lo[0] + (hi[0] - lo[0]) * i as f64 / (pts - 1) as f64,
                            lo[1] + (hi[1] - lo[1]) * j as f64 / (pts - 1) as f64,
                            lo[2] + (hi[2] - lo[2]) * k as f64 / (pts - 1) as f64,
                        ];
                        let (v, _) = evaluate(&x, &k_s, &k_sc, y.as_vector(), false);
                        if v > best.0 {
                            best = (v, x);
                        }
                    }
                }
            }
            best.1
        };
        let c = stage([-6.0; 3], [2.0; 3], 33);
        let w = 2.0 * 8.0 / 32.0;
        let fine = stage(
            [c[0] - w, c[1] - w, c[2] - w],
            [c[0] + w, c[1] + w, c[2] + w],
            33,
        );
        for (a, b) in [est.sigma2_s, est.sigma2_sc, est.sigma2_e]
            .iter()
            .zip(fine.iter().map(|v| v.exp()))
        {
            assert!((a - b).abs() < 1e-2, "component {a} vs grid {b}");
        }
    }

    #[test]
    fn rejects_bad_subsets() {
        let (y, z, _) = toy_data(75, 20, 8, 0.5, 0.3, 0.3, 0.4);
        let opts = TwoComponentOptions::default();
        assert!(ml_two_component(&y, &z, &[], &opts).is_err());
        assert!(ml_two_component(&y, &z, &(0..8).collect::<Vec<_>>(), &opts).is_err());
        assert!(ml_two_component(&y, &z, &[3, 1], &opts).is_err());
        assert!(ml_two_component(&y, &z, &[9], &opts).is_err());
    }
}
