//! Ground-truth heritability for the fixed-effects model: total,
//! partitioned (Schur-complement form) and projection ("C") heritability.
//! These are the estimands the simulation experiments compare against.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::SpdSolver;
use crate::model::{EffectVector, LDMatrix, ProjectionSpec};

const COND_LIMIT: f64 = 1e12;

/// h2 = u^T Sigma u / (u^T Sigma u + sigma_e2).
pub fn true_h2_fixed(u: &EffectVector, sigma: &LDMatrix, sigma_e2: f64) -> Result<f64> {
    check_inputs(u, sigma, sigma_e2)?;
    let genetic = sigma.quad_form(u.u());
    let total = genetic + sigma_e2;
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(genetic / total)
}

/// Heritability attributable to the subset S (0-based, ascending):
///
///   h2_S = (u^T Sigma u - u_{S^c}^T Sigma_{S^c|S} u_{S^c}) / (u^T Sigma u + sigma_e2),
///
/// with Sigma_{S^c|S} the Schur complement
/// Sigma_{S^c,S^c} - Sigma_{S^c,S} Sigma_{S,S}^{-1} Sigma_{S,S^c}.
///
/// The computation is blockwise: both the quadratic form and the Schur term
/// decompose over the diagonal blocks of the LD matrix for any S. Passing
/// S = [m] degenerates gracefully to the total heritability.
pub fn true_partitioned_h2(
    u: &EffectVector,
    sigma: &LDMatrix,
    s: &[usize],
    sigma_e2: f64,
) -> Result<f64> {
    check_inputs(u, sigma, sigma_e2)?;
    validate_subset(s, sigma.dim())?;
    let genetic = sigma.quad_form(u.u());
    let total = genetic + sigma_e2;
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((genetic - schur_remainder(u.u(), sigma, s)?) / total)
}

/// The conditional-variance term u_{S^c}^T Sigma_{S^c|S} u_{S^c}, blockwise.
fn schur_remainder(u: &DVector<f64>, sigma: &LDMatrix, s: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for b in 0..sigma.block_count() {
        let range = sigma.block_range(b);
        let block = sigma.block_sigma(b);
        let local_s: Vec<usize> = s
            .iter()
            .copied()
            .filter(|j| range.contains(j))
            .map(|j| j - range.start)
            .collect();
        let in_s = {
            let mut mask = vec![false; range.len()];
            for &j in &local_s {
                mask[j] = true;
            }
            mask
        };
        let local_sc: Vec<usize> = (0..range.len()).filter(|&j| !in_s[j]).collect();
        if local_sc.is_empty() {
            continue;
        }
        let u_sc = DVector::from_iterator(
            local_sc.len(),
            local_sc.iter().map(|&j| u[range.start + j]),
        );
        if local_s.is_empty() {
            // S misses this block entirely: the conditional covariance is the
            // whole block
            let d = block.select_columns(local_sc.iter()).select_rows(local_sc.iter());
            total += (&d * &u_sc).dot(&u_sc);
            continue;
        }
        let d = block.select_columns(local_sc.iter()).select_rows(local_sc.iter());
        let quad_marginal = (&d * &u_sc).dot(&u_sc);
        // cross-block: B = Sigma_{S_b, Sc_b}
        let cross = block.select_columns(local_sc.iter()).select_rows(local_s.iter());
        let a = block.select_columns(local_s.iter()).select_rows(local_s.iter());
        let w = cross * &u_sc;
        let solver = SpdSolver::new(a, COND_LIMIT, "Sigma_{S,S} Schur complement")?;
        total += quad_marginal - w.dot(&solver.solve_vec(&w));
    }
    Ok(total)
}

/// General projection heritability:
///
///   h2_C = u^T Sigma C (C^T Sigma C)^{-1} C^T Sigma u / (u^T Sigma u + sigma_e2).
///
/// The Identity projection reproduces `true_h2_fixed`; a Subset projection
/// equals `true_partitioned_h2` through an algebraically different route
/// (projection form here, Schur form there).
pub fn true_c_h2(
    u: &EffectVector,
    sigma: &LDMatrix,
    c: &ProjectionSpec,
    sigma_e2: f64,
) -> Result<f64> {
    check_inputs(u, sigma, sigma_e2)?;
    let genetic = sigma.quad_form(u.u());
    let total = genetic + sigma_e2;
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let numerator = match c {
        ProjectionSpec::Identity => genetic,
        ProjectionSpec::Subset(s) => {
            validate_subset(s, sigma.dim())?;
            // (Sigma u)_S^T (Sigma_{S,S})^{-1} (Sigma u)_S, blockwise
            let t = sigma.mul_vec(u.u());
            let mut acc = 0.0;
            for b in 0..sigma.block_count() {
                let range = sigma.block_range(b);
                let local: Vec<usize> = s
                    .iter()
                    .copied()
                    .filter(|j| range.contains(j))
                    .map(|j| j - range.start)
                    .collect();
                if local.is_empty() {
                    continue;
                }
                let block = sigma.block_sigma(b);
                let a = block.select_columns(local.iter()).select_rows(local.iter());
                let w = DVector::from_iterator(
                    local.len(),
                    local.iter().map(|&j| t[range.start + j]),
                );
                let solver = SpdSolver::new(a, COND_LIMIT, "Sigma_{S,S} projection form")?;
                acc += w.dot(&solver.solve_vec(&w));
            }
            acc
        }
        ProjectionSpec::General(cmat) => {
            if cmat.nrows() != sigma.dim() {
                return Err(Error::DimensionMismatch {
                    context: "true_c_h2: projection rows vs LD dimension",
                    expected: sigma.dim(),
                    found: cmat.nrows(),
                });
            }
            let sigma_c = sigma.mul_mat(cmat); // Sigma C (m x k)
            let gram = cmat.transpose() * &sigma_c; // C^T Sigma C
            let w = sigma_c.transpose() * u.u(); // C^T Sigma u
            let solver = SpdSolver::new(gram, COND_LIMIT, "C^T Sigma C")
                .map_err(|e| match e {
                    Error::RankDeficient { .. } => Error::RankDeficient {
                        context: "C^T Sigma C in true_c_h2",
                    },
                    other => other,
                })?;
            w.dot(&solver.solve_vec(&w))
        }
    };
    Ok(numerator / total)
}

fn check_inputs(u: &EffectVector, sigma: &LDMatrix, sigma_e2: f64) -> Result<()> {
    if u.len() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            context: "truth: effect length vs LD dimension",
            expected: sigma.dim(),
            found: u.len(),
        });
    }
    if !(sigma_e2 >= 0.0) || !sigma_e2.is_finite() {
        return Err(Error::invalid(format!(
            "sigma_e2 must be finite and >= 0; got {sigma_e2}"
        )));
    }
    Ok(())
}

fn validate_subset(s: &[usize], m: usize) -> Result<()> {
    if s.is_empty() {
        return Err(Error::invalid("subset must be nonempty"));
    }
    if !s.windows(2).all(|w| w[0] < w[1]) || *s.last().unwrap() >= m {
        return Err(Error::invalid(
            "subset indices must be strictly ascending and within range",
        ));
    }
    Ok(())
}

/// Ground-truth summary for one realized effect vector: total heritability,
/// per-subset partitioned heritability, per-projection heritability and the
/// variance components behind them.
#[derive(Debug, Clone, Serialize)]
pub struct TruthReport {
    pub h2_total: f64,
    pub h2_subsets: Vec<SubsetTruth>,
    pub h2_projections: Vec<ProjectionTruth>,
    pub genetic_variance: f64,
    pub sigma_e2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetTruth {
    pub name: String,
    pub size: usize,
    pub h2_s: f64,
    /// Conditional-variance remainder u_{S^c}^T Sigma_{S^c|S} u_{S^c}.
    pub schur_term: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionTruth {
    pub name: String,
    pub rank: usize,
    pub h2_c: f64,
}

/// Evaluate every requested estimand for one effect vector. Subset and
/// projection entries are (name, spec) pairs; a subset equal to the full
/// index set reports the total.
pub fn truth_report(
    u: &EffectVector,
    sigma: &LDMatrix,
    sigma_e2: f64,
    subsets: &[(String, Vec<usize>)],
    projections: &[(String, ProjectionSpec)],
) -> Result<TruthReport> {
    let h2_total = true_h2_fixed(u, sigma, sigma_e2)?;
    let genetic = sigma.quad_form(u.u());
    let mut h2_subsets = Vec::with_capacity(subsets.len());
    for (name, s) in subsets {
        let h2_s = true_partitioned_h2(u, sigma, s, sigma_e2)?;
        let schur = schur_remainder(u.u(), sigma, s)?;
        h2_subsets.push(SubsetTruth {
            name: name.clone(),
            size: s.len(),
            h2_s,
            schur_term: schur,
        });
    }
    let mut h2_projections = Vec::with_capacity(projections.len());
    for (name, spec) in projections {
        h2_projections.push(ProjectionTruth {
            name: name.clone(),
            rank: spec.rank(sigma.dim()),
            h2_c: true_c_h2(u, sigma, spec, sigma_e2)?,
        });
    }
    Ok(TruthReport {
        h2_total,
        h2_subsets,
        h2_projections,
        genetic_variance: genetic,
        sigma_e2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_block_ar_sigma, ArBlockSpec, RngStream};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn effects_from(u: Vec<f64>) -> EffectVector {
        let m = u.len();
        let causal: Vec<usize> = (0..m).filter(|&j| u[j] != 0.0).collect();
        let psi = vec![0.0; causal.len()];
        EffectVector::new(DVector::from_vec(u), causal, psi, 0.0).unwrap()
    }

    fn random_instance(
        rng: &mut impl Rng,
        m: usize,
    ) -> (EffectVector, LDMatrix) {
        let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sigma =
            LDMatrix::from_dense(&a * a.transpose() + DMatrix::identity(m, m) * (m as f64 * 0.2))
                .unwrap();
        let u: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        (effects_from(u), sigma)
    }

    #[test]
    fn zero_effects_zero_heritability() {
        let sigma = LDMatrix::identity(4);
        let u = EffectVector::zeros(4);
        assert_eq!(true_h2_fixed(&u, &sigma, 1.0).unwrap(), 0.0);
        assert!(true_h2_fixed(&u, &sigma, 0.0).is_err());
    }

    #[test]
    fn equal_components_give_half() {
        let sigma = LDMatrix::identity(3);
        let u = effects_from(vec![0.5, 0.5, 0.5]);
        let norm2 = 0.75;
        assert_relative_eq!(
            true_h2_fixed(&u, &sigma, norm2).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn monte_carlo_variance_oracle() {
        // Var(z^T u) over Gaussian z with covariance Sigma matches u^T Sigma u
        let mut rng = RngStream::new(80, 0).rng();
        let (u, sigma) = random_instance(&mut rng, 6);
        let quad = sigma.quad_form(u.u());
        let reps = 1_000_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..reps {
            let x = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
            let z = sigma.sqrt_mul_vec(&x);
            let v = z.dot(u.u());
            acc += v;
            acc2 += v * v;
        }
        let var = acc2 / reps as f64 - (acc / reps as f64).powi(2);
        assert!(
            (var - quad).abs() < 0.01 * quad,
            "MC variance {var} vs quadratic form {quad}"
        );
    }

    #[test]
    fn all_causals_inside_s_recovers_total() {
        let mut rng = RngStream::new(81, 0).rng();
        let (mut u_full, sigma) = random_instance(&mut rng, 8);
        // zero out the complement of S = {0,1,2,3}
        let mut u = u_full.u().clone();
        for j in 4..8 {
            u[j] = 0.0;
        }
        u_full = effects_from(u.iter().copied().collect());
        let s: Vec<usize> = (0..4).collect();
        let h2 = true_h2_fixed(&u_full, &sigma, 0.7).unwrap();
        let h2_s = true_partitioned_h2(&u_full, &sigma, &s, 0.7).unwrap();
        assert_relative_eq!(h2_s, h2, epsilon = 1e-12);
    }

    #[test]
    fn full_set_is_total() {
        let mut rng = RngStream::new(82, 0).rng();
        let (u, sigma) = random_instance(&mut rng, 5);
        let h2 = true_h2_fixed(&u, &sigma, 0.5).unwrap();
        let h2_s = true_partitioned_h2(&u, &sigma, &(0..5).collect::<Vec<_>>(), 0.5).unwrap();
        assert_relative_eq!(h2_s, h2, epsilon = 1e-14);
    }

    #[test]
    fn conditional_variance_monte_carlo_oracle() {
        // 4x4 AR(0.5), u = (1,0,0,1), S = {0,1}: h2_S must match
        // 1 - E(Var(y|z_S))/Var(y) estimated by the Gaussian regression
        // identity Var(y|z_S) = sigma_e2 + u_{Sc}^T Sigma_{Sc|S} u_{Sc}
        // evaluated by Monte Carlo over z_S draws.
        let sigma = build_block_ar_sigma(&ArBlockSpec::new(4, vec![0.5]).unwrap()).unwrap();
        let u = effects_from(vec![1.0, 0.0, 0.0, 1.0]);
        let sigma_e2 = 0.8;
        let h2_s = true_partitioned_h2(&u, &sigma, &[0, 1], sigma_e2).unwrap();

        // Monte Carlo: draw z ~ N(0, Sigma); y = z'u + e. Regress the
        // conditional mean analytically per draw is equivalent to the Schur
        // form, so estimate Var(y) and E Var(y | z_S) by nested simulation:
        // Var(y|z_S) is constant in z_S under Gaussianity, estimate it as
        // Var(y - E[y|z_S]) with E[y|z_S] = z_S' beta, beta from the
        // population regression of z'u on z_S.
        let dense = sigma.dense();
        let s_cols = [0usize, 1];
        let a = dense.select_columns(s_cols.iter()).select_rows(s_cols.iter());
        let cross = dense.select_columns(s_cols.iter()).transpose() * u.u(); // Sigma_{S,:} u
        let beta = a.try_inverse().unwrap() * cross;
        let mut rng = RngStream::new(83, 0).rng();
        let reps = 500_000;
        let (mut sy, mut syy, mut sr, mut srr) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..reps {
            let x = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
            let z = sigma.sqrt_mul_vec(&x);
            let e: f64 = rng.sample::<f64, _>(StandardNormal);
            let y = z.dot(u.u()) + sigma_e2.sqrt() * e;
            let cond_mean = beta[0] * z[0] + beta[1] * z[1];
            let resid = y - cond_mean;
            sy += y;
            syy += y * y;
            sr += resid;
            srr += resid * resid;
        }
        let var_y = syy / reps as f64 - (sy / reps as f64).powi(2);
        let var_resid = srr / reps as f64 - (sr / reps as f64).powi(2);
        let mc = 1.0 - var_resid / var_y;
        assert!(
            (mc - h2_s).abs() < 0.01,
            "MC conditional-variance {mc} vs Schur form {h2_s}"
        );
    }

    #[test]
    fn projection_identity_and_subset_agree_with_other_routes() {
        let mut rng = RngStream::new(84, 0).rng();
        for _ in 0..10 {
            let (u, sigma) = random_instance(&mut rng, 7);
            let h2 = true_h2_fixed(&u, &sigma, 0.9).unwrap();
            let via_c = true_c_h2(&u, &sigma, &ProjectionSpec::Identity, 0.9).unwrap();
            assert_relative_eq!(via_c, h2, epsilon = 1e-10);
            let s = vec![1usize, 3, 4];
            let via_schur = true_partitioned_h2(&u, &sigma, &s, 0.9).unwrap();
            let via_proj = true_c_h2(
                &u,
                &sigma,
                &ProjectionSpec::subset(s.clone(), 7).unwrap(),
                0.9,
            )
            .unwrap();
            assert_relative_eq!(via_proj, via_schur, epsilon = 1e-10);
        }
    }

    #[test]
    fn whitening_identity_cher2() {
        // h2_C(u; Sigma) = h2_{Sigma^{1/2} C}(Sigma^{1/2} u; I)
        let mut rng = RngStream::new(85, 0).rng();
        for _ in 0..10 {
            let (u, sigma) = random_instance(&mut rng, 6);
            let c = DMatrix::from_fn(6, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let lhs = true_c_h2(&u, &sigma, &ProjectionSpec::general(c.clone()).unwrap(), 0.5)
                .unwrap();
            let sqrt_u = sigma.sqrt_mul_vec(u.u());
            let sqrt_c = sigma.sqrt_mul_mat(&c);
            // denominators must match: u^T Sigma u = ||Sigma^{1/2} u||^2
            let u2 = effects_from(sqrt_u.iter().copied().collect());
            let eye = LDMatrix::identity(6);
            let rhs = true_c_h2(&u2, &eye, &ProjectionSpec::general(sqrt_c).unwrap(), 0.5)
                .unwrap();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-10);
        }
    }

    #[test]
    fn near_singular_ld_rejected_at_construction() {
        // interlacing makes every principal submatrix at least as well
        // conditioned as Sigma itself, so the LD eigenvalue floor is the
        // gate that protects the Schur machinery
        let mut a = DMatrix::identity(4, 4);
        a[(0, 1)] = 1.0 - 1e-13;
        a[(1, 0)] = 1.0 - 1e-13;
        assert!(LDMatrix::from_dense(a).is_err());
    }
}
