//! Randomized property suite for the partitioned-heritability axioms and
//! the projection-form identities.

use herit_core::model::{EffectVector, LDMatrix, ProjectionSpec};
use herit_core::sim::RngStream;
use herit_core::truth::{true_c_h2, true_h2_fixed, true_partitioned_h2};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_distr::StandardNormal;

fn effects_from(u: Vec<f64>) -> EffectVector {
    let m = u.len();
    let causal: Vec<usize> = (0..m).filter(|&j| u[j] != 0.0).collect();
    let psi = vec![0.0; causal.len()];
    EffectVector::new(DVector::from_vec(u), causal, psi, 0.0).unwrap()
}

fn random_spd(rng: &mut impl Rng, m: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    &a * a.transpose() + DMatrix::identity(m, m) * (0.3 * m as f64)
}

fn random_subset(rng: &mut impl Rng, m: usize) -> Vec<usize> {
    loop {
        let s: Vec<usize> = (0..m).filter(|_| rng.random::<f64>() < 0.5).collect();
        if !s.is_empty() && s.len() < m {
            return s;
        }
    }
}

#[test]
fn partition_bounds_and_equality_conditions() {
    let mut rng = RngStream::new(1001, 0).rng();
    for trial in 0..300 {
        let m = 4 + (rng.random::<f64>() * 8.0) as usize;
        let sigma = LDMatrix::from_dense(random_spd(&mut rng, m)).unwrap();
        let u: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let u = effects_from(u);
        let s = random_subset(&mut rng, m);
        let sigma_e2 = 0.1 + rng.random::<f64>();
        let h2 = true_h2_fixed(&u, &sigma, sigma_e2).unwrap();
        let h2_s = true_partitioned_h2(&u, &sigma, &s, sigma_e2).unwrap();

        // (i) 0 <= h2_S <= h2
        assert!(h2_s >= -1e-10, "trial {trial}: h2_S = {h2_s}");
        assert!(h2_s <= h2 + 1e-10, "trial {trial}: h2_S = {h2_s} > h2 = {h2}");

        // (ii) equality within 1e-12 forces u_{S^c} ~ 0
        if (h2 - h2_s).abs() <= 1e-12 {
            let norm_sc: f64 = (0..m)
                .filter(|j| !s.contains(j))
                .map(|j| u.u()[j] * u.u()[j])
                .sum::<f64>()
                .sqrt();
            assert!(norm_sc < 1e-8, "trial {trial}: equality with ||u_Sc|| = {norm_sc}");
        }

        // (ii) forward direction: zero the complement and equality holds
        let mut u_in = u.u().clone();
        for j in 0..m {
            if !s.contains(&j) {
                u_in[j] = 0.0;
            }
        }
        let u_in = effects_from(u_in.iter().copied().collect());
        let h2_f = true_h2_fixed(&u_in, &sigma, sigma_e2).unwrap();
        let h2_sf = true_partitioned_h2(&u_in, &sigma, &s, sigma_e2).unwrap();
        assert!(
            (h2_f - h2_sf).abs() <= 1e-12,
            "trial {trial}: forward equality violated: {h2_f} vs {h2_sf}"
        );
    }
}

#[test]
fn partition_numerator_ignores_sc_block() {
    // restated property (iii): the numerator quadratic form is invariant to
    // perturbations of Sigma_{S^c,S^c}; the ratio changes only through the
    // denominator
    let mut rng = RngStream::new(1002, 0).rng();
    for trial in 0..200 {
        let m = 5 + (rng.random::<f64>() * 6.0) as usize;
        let base = random_spd(&mut rng, m);
        let sigma = LDMatrix::from_dense(base.clone()).unwrap();
        let u: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let u = effects_from(u);
        let s = random_subset(&mut rng, m);
        let sigma_e2 = 0.5;

        // PSD bump confined to the S^c x S^c block
        let sc: Vec<usize> = (0..m).filter(|j| !s.contains(j)).collect();
        let g = DMatrix::from_fn(sc.len(), sc.len(), |_, _| {
            rng.sample::<f64, _>(StandardNormal) * 0.3
        });
        let bump = &g * g.transpose();
        let mut perturbed = base.clone();
        for (a, &ia) in sc.iter().enumerate() {
            for (b, &ib) in sc.iter().enumerate() {
                perturbed[(ia, ib)] += bump[(a, b)];
            }
        }
        let sigma_p = LDMatrix::from_dense(perturbed).unwrap();

        let h2_s = true_partitioned_h2(&u, &sigma, &s, sigma_e2).unwrap();
        let h2_s_p = true_partitioned_h2(&u, &sigma_p, &s, sigma_e2).unwrap();
        let num = h2_s * (sigma.quad_form(u.u()) + sigma_e2);
        let num_p = h2_s_p * (sigma_p.quad_form(u.u()) + sigma_e2);
        let scale = num.abs().max(1.0);
        assert!(
            (num - num_p).abs() <= 1e-10 * scale,
            "trial {trial}: numerator moved {num} -> {num_p}"
        );

        // and h2_S itself changes exactly through the denominator
        let expected = num / (sigma_p.quad_form(u.u()) + sigma_e2);
        assert!(
            (h2_s_p - expected).abs() <= 1e-10,
            "trial {trial}: ratio not denominator-only"
        );
    }
}

#[test]
fn basis_invariance_full_rank() {
    let mut rng = RngStream::new(1003, 0).rng();
    for trial in 0..100 {
        let m = 4 + (rng.random::<f64>() * 6.0) as usize;
        let sigma = LDMatrix::from_dense(random_spd(&mut rng, m)).unwrap();
        let u: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let u = effects_from(u);
        // random invertible B (add identity to keep it away from singular)
        let b = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal))
            + DMatrix::identity(m, m) * 2.0;
        let h2 = true_h2_fixed(&u, &sigma, 0.7).unwrap();
        let h2_b = true_c_h2(&u, &sigma, &ProjectionSpec::general(b).unwrap(), 0.7).unwrap();
        assert!(
            (h2 - h2_b).abs() <= 1e-10,
            "trial {trial}: h2 = {h2}, h2_B = {h2_b}"
        );
    }
}

#[test]
fn monotone_under_nesting() {
    let mut rng = RngStream::new(1004, 0).rng();
    for trial in 0..500 {
        let m = 5 + (rng.random::<f64>() * 7.0) as usize;
        let sigma = LDMatrix::from_dense(random_spd(&mut rng, m)).unwrap();
        let u: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let u = effects_from(u);
        let small = random_subset(&mut rng, m);
        // grow the subset by adding one element not already inside
        let extra = (0..m).find(|j| !small.contains(j));
        let mut big = small.clone();
        if let Some(e) = extra {
            big.push(e);
            big.sort_unstable();
        }
        let h2_small = true_partitioned_h2(&u, &sigma, &small, 0.4).unwrap();
        let h2_big = true_partitioned_h2(&u, &sigma, &big, 0.4).unwrap();
        assert!(
            h2_small <= h2_big + 1e-12,
            "trial {trial}: nesting violated: {h2_small} > {h2_big}"
        );
    }
}

#[test]
fn subset_projection_cross_check() {
    // Schur form vs projection form on block-diagonal LD
    let mut rng = RngStream::new(1005, 0).rng();
    for _ in 0..50 {
        let blocks = vec![random_spd(&mut rng, 4), random_spd(&mut rng, 5)];
        let sigma = LDMatrix::from_blocks(blocks).unwrap();
        let u: Vec<f64> = (0..9).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let u = effects_from(u);
        let s = random_subset(&mut rng, 9);
        let schur = true_partitioned_h2(&u, &sigma, &s, 0.6).unwrap();
        let proj = true_c_h2(
            &u,
            &sigma,
            &ProjectionSpec::subset(s.clone(), 9).unwrap(),
            0.6,
        )
        .unwrap();
        assert!((schur - proj).abs() <= 1e-10);
    }
}
