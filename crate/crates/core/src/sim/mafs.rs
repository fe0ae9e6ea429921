use rand::Rng;

use crate::error::{Error, Result};
use crate::model::MafVector;

/// Draw m MAFs i.i.d. uniform on [min_maf, 0.5], subject to the adjacency
/// constraint |p_j - p_{j+1}| < max_adjacent_diff enforced by sequential
/// rejection.
pub fn sample_mafs(
    m: usize,
    min_maf: f64,
    max_adjacent_diff: f64,
    rng: &mut impl Rng,
) -> Result<MafVector> {
    if m == 0 {
        return Err(Error::invalid("m must be >= 1"));
    }
    if !(0.0 < min_maf && min_maf <= 0.5) {
        return Err(Error::invalid(format!(
            "min_maf must lie in (0, 0.5]; got {min_maf}"
        )));
    }
    if max_adjacent_diff <= 0.0 {
        return Err(Error::invalid(
            "max_adjacent_diff must be positive for the sequential sampler",
        ));
    }
    fn draw<R: Rng>(rng: &mut R, min_maf: f64) -> f64 {
        min_maf + (0.5 - min_maf) * rng.random::<f64>()
    }
    let mut p = Vec::with_capacity(m);
    p.push(draw(rng, min_maf));
    for j in 1..m {
        // rejection on the adjacency gap; acceptance probability is bounded
        // away from zero for any max_adjacent_diff > 0
        let prev = p[j - 1];
        let mut attempts = 0usize;
        let next = loop {
            let cand = draw(rng, min_maf);
            if (cand - prev).abs() < max_adjacent_diff {
                break cand;
            }
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::NonConvergence {
                    iterations: attempts,
                    last: prev,
                });
            }
        };
        p.push(next);
    }
    MafVector::new(p)
}
