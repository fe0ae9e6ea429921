use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{EffectVector, MafVector};

/// How the causal set A is realized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CausalMode {
    /// Every SNP is causal.
    All,
    /// A fixed index set (0-based, strictly ascending).
    Region(Vec<usize>),
    /// `size` indices sampled uniformly without replacement from `from`.
    UniformSample { size: usize, from: Vec<usize> },
}

/// How the per-index draw variance psi_j is allocated over the causal set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectVarianceRule {
    /// psi_j = sigma_g2 / |A|.
    Equal,
    /// psi_j proportional to (p_j (1 - p_j))^{-1}, normalized so the psi sum
    /// over A equals sigma_g2.
    MafWeighted,
}

#[derive(Debug, Clone)]
pub struct CausalConfig {
    pub mode: CausalMode,
    pub variance_rule: EffectVarianceRule,
}

/// Draw a fixed-effects vector: u_j ~ N(0, psi_j) independently on the
/// realized causal set, exactly zero elsewhere.
///
/// `mafs` is only consulted for the MAF-weighted rule and may be `None`
/// otherwise.
pub fn simulate_effects(
    config: &CausalConfig,
    m: usize,
    mafs: Option<&MafVector>,
    sigma_g2: f64,
    rng: &mut impl Rng,
) -> Result<EffectVector> {
    if !(sigma_g2 >= 0.0) || !sigma_g2.is_finite() {
        return Err(Error::invalid(format!(
            "genetic variance must be finite and >= 0; got {sigma_g2}"
        )));
    }
    if let Some(p) = mafs {
        if p.len() != m {
            return Err(Error::DimensionMismatch {
                context: "simulate_effects: MAF length vs m",
                expected: m,
                found: p.len(),
            });
        }
    }
    let causal = realize_causal_set(&config.mode, m, rng)?;
    if causal.is_empty() {
        if sigma_g2 > 0.0 {
            return Err(Error::invalid(
                "empty causal set with nonzero genetic variance",
            ));
        }
        return Ok(EffectVector::zeros(m));
    }
    if sigma_g2 == 0.0 {
        return Ok(EffectVector::zeros(m));
    }

    let psi: Vec<f64> = match config.variance_rule {
        EffectVarianceRule::Equal => vec![sigma_g2 / causal.len() as f64; causal.len()],
        EffectVarianceRule::MafWeighted => {
            let p = mafs.ok_or_else(|| {
                Error::invalid("MAF-weighted effect variances require a MAF vector")
            })?;
            let weights: Vec<f64> = causal
                .iter()
                .map(|&j| 1.0 / (p.get(j) * (1.0 - p.get(j))))
                .collect();
            let c: f64 = weights.iter().sum::<f64>() / sigma_g2;
            weights.into_iter().map(|w| w / c).collect()
        }
    };

    let mut u = DVector::zeros(m);
    for (idx, &j) in causal.iter().enumerate() {
        let g: f64 = rng.sample(StandardNormal);
        u[j] = g * psi[idx].sqrt();
    }
    EffectVector::new(u, causal, psi, sigma_g2)
}

fn realize_causal_set(mode: &CausalMode, m: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    match mode {
        CausalMode::All => Ok((0..m).collect()),
        CausalMode::Region(idx) => {
            validate_region(idx, m)?;
            Ok(idx.clone())
        }
        CausalMode::UniformSample { size, from } => {
            validate_region(from, m)?;
            if *size > from.len() {
                return Err(Error::invalid(format!(
                    "cannot sample {size} causal indices from a region of {}",
                    from.len()
                )));
            }
            if from.is_empty() && *size > 0 {
                return Err(Error::invalid("empty region with nonzero requested |A|"));
            }
            let picks = rand::seq::index::sample(rng, from.len(), *size);
            let mut chosen: Vec<usize> = picks.into_iter().map(|i| from[i]).collect();
            chosen.sort_unstable();
            Ok(chosen)
        }
    }
}

fn validate_region(idx: &[usize], m: usize) -> Result<()> {
    if !idx.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid(
            "causal region must be strictly ascending and duplicate-free",
        ));
    }
    if let Some(&last) = idx.last() {
        if last >= m {
            return Err(Error::invalid(format!(
                "causal index {last} out of range for m = {m}"
            )));
        }
    }
    Ok(())
}
