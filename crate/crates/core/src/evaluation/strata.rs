use std::ops::Range;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed;
use crate::selection::SelectionSequence;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StratifiedSample {
    /// 0-based stratum index; stratum 0 holds the earliest removals.
    pub stratum: usize,
    /// Ascending test ids.
    pub ids: Vec<usize>,
}

/// Consecutive position ranges over the removal order. The last stratum
/// absorbs the remainder when `n` is not a multiple of `strata`.
pub fn strata_bounds(n: usize, strata: usize) -> Result<Vec<Range<usize>>> {
    if strata == 0 || strata > n {
        return Err(Error::Strata(format!("need 1 <= strata <= {n}, got {strata}")));
    }
    let size = n / strata;
    Ok((0..strata)
        .map(|s| {
            let end = if s + 1 == strata { n } else { (s + 1) * size };
            s * size..end
        })
        .collect())
}

/// Samples test sets that each lie wholly within one stratum of the
/// removal order. Sample `i` draws from its own stream of `seed`.
pub fn strata_sample(
    seq: &SelectionSequence,
    strata: usize,
    set_size: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<StratifiedSample>> {
    let order = seq.full_order();
    let bounds = strata_bounds(order.len(), strata)?;
    let smallest = bounds.iter().map(|r| r.len()).min().unwrap_or(0);
    if set_size == 0 || set_size > smallest {
        return Err(Error::Strata(format!(
            "set size {set_size} must be between 1 and the smallest stratum ({smallest})"
        )));
    }
    Ok((0..samples as u64)
        .map(|i| {
            let mut rng = seed::rng_for(seed, i);
            let stratum = rng.gen_range(0..strata);
            let range = bounds[stratum].clone();
            let mut ids: Vec<usize> = index::sample(&mut rng, range.len(), set_size)
                .into_iter()
                .map(|offset| order[range.start + offset])
                .collect();
            ids.sort_unstable();
            StratifiedSample { stratum, ids }
        })
        .collect())
}
