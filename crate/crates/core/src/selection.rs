//! Test set selection: the diameter-driven reduction chain and two baselines.
//!
//! [`tsdm_reduce`] starts from the whole pool `Y₀` and repeatedly drops the
//! member whose removal leaves the largest compressed length `C(Yₖ \ {x})`,
//! recording `NCD1(Yₖ)` at every step until two members remain. The maximum
//! of those values approximates the multiset NCD of the pool (its diameter),
//! and every link of the chain is a candidate diverse test set.

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compression::{compressed_length, concat_length_iter, CodecId};
use crate::distance::{ncd_ratio, Pool};
use crate::error::{Error, Result};
use crate::seed;

/// The nested chain `Y₀ ⊃ Y₁ ⊃ … ⊃ Y_{n-2}` produced by [`tsdm_reduce`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSequence {
    /// Ids in the order they were removed; length `n - 2`.
    pub removal_order: Vec<usize>,
    /// `NCD1(Yₖ)` for `k = 0..=n-2`.
    pub step_diameters: Vec<f64>,
    pub diameter: f64,
    /// The last two members. `survivors[1]` is kept when a single test is
    /// requested (smaller compressed length, ties to the smaller id);
    /// `survivors[0]` is dropped.
    pub survivors: [usize; 2],
    pub pool_size: usize,
    pub pool_digest: String,
    pub codec: CodecId,
}

impl SelectionSequence {
    /// Every id in removal order, ending with the test that would be kept
    /// alone.
    pub fn full_order(&self) -> Vec<usize> {
        let mut order = self.removal_order.clone();
        order.extend_from_slice(&self.survivors);
        order
    }

    /// `Y_{n-k}`: the pool minus the first `n - k` removals, ascending ids.
    /// `k = 1` keeps `survivors[1]`.
    pub fn select_k(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.pool_size;
        if k < 1 || k > n {
            return Err(Error::KOutOfRange { k, min: 1, max: n });
        }
        let mut kept: Vec<usize> = self.full_order()[n - k..].to_vec();
        kept.sort_unstable();
        Ok(kept)
    }

    /// For each id, the size of the smallest chain set that contains it.
    pub fn first_inclusion_sizes(&self) -> Vec<usize> {
        let n = self.pool_size;
        let mut sizes = vec![0; n];
        for (pos, id) in self.full_order().into_iter().enumerate() {
            sizes[id] = n - pos;
        }
        sizes
    }
}

/// Free-function form of [`SelectionSequence::select_k`].
pub fn select_k(seq: &SelectionSequence, k: usize) -> Result<Vec<usize>> {
    seq.select_k(k)
}

/// Runs the reduction chain over the whole pool.
pub fn tsdm_reduce(pool: &Pool) -> Result<SelectionSequence> {
    let n = pool.len();
    if n < 2 {
        return Err(Error::TooSmall {
            what: "pool",
            need: 2,
            got: n,
        });
    }
    let codec = pool.codec();
    let singles: Vec<usize> = pool
        .ids()
        .into_par_iter()
        .map(|id| compressed_length(codec, pool.payload(id)).bytes())
        .collect();

    let mut alive: Vec<usize> = pool.ids().collect();
    let mut set_length = concat_length_iter(codec, alive.iter().map(|&i| pool.payload(i))).bytes();
    let mut removal_order = Vec::with_capacity(n - 2);
    let mut step_diameters = Vec::with_capacity(n - 1);

    while alive.len() > 2 {
        let min_single = alive.iter().map(|&i| singles[i]).min().expect("non-empty");
        let (pos, best_len) = alive
            .par_iter()
            .enumerate()
            .map(|(pos, &skip)| {
                let rest = alive.iter().filter(|&&i| i != skip).map(|&i| pool.payload(i));
                (pos, concat_length_iter(codec, rest).bytes())
            })
            // `alive` is ascending, so the smaller position is the smaller id.
            .reduce(
                || (usize::MAX, 0),
                |a, b| match (a.0 == usize::MAX, b.0 == usize::MAX) {
                    (true, _) => b,
                    (_, true) => a,
                    _ if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) => b,
                    _ => a,
                },
            );
        step_diameters.push(ncd_ratio(set_length, min_single, best_len));
        removal_order.push(alive.remove(pos));
        set_length = best_len;
    }

    let (a, b) = (alive[0], alive[1]);
    step_diameters.push(ncd_ratio(
        set_length,
        singles[a].min(singles[b]),
        singles[a].max(singles[b]),
    ));
    // A lone test keeps the shorter compressed survivor (ties: smaller id).
    let survivors = if singles[b] < singles[a] { [a, b] } else { [b, a] };
    let diameter = step_diameters.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    Ok(SelectionSequence {
        removal_order,
        step_diameters,
        diameter,
        survivors,
        pool_size: n,
        pool_digest: pool.digest(),
        codec: codec.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageKind {
    Structural,
    Fault,
}

/// Per-test binary coverage (or fault detection) over named units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageMatrix {
    unit_names: Vec<String>,
    rows: Vec<FixedBitSet>,
    kind: CoverageKind,
}

impl CoverageMatrix {
    pub fn new(unit_names: Vec<String>, rows: Vec<FixedBitSet>, kind: CoverageKind) -> Result<Self> {
        for (id, row) in rows.iter().enumerate() {
            if row.len() != unit_names.len() {
                return Err(Error::CoverageCsv(format!(
                    "row {id} has {} units, expected {}",
                    row.len(),
                    unit_names.len()
                )));
            }
        }
        Ok(CoverageMatrix { unit_names, rows, kind })
    }

    /// Builds a matrix from the covered unit indices of each row.
    pub fn from_sets(unit_names: Vec<String>, covered: &[Vec<usize>], kind: CoverageKind) -> Result<Self> {
        let units = unit_names.len();
        let rows = covered
            .iter()
            .map(|set| {
                let mut row = FixedBitSet::with_capacity(units);
                for &u in set {
                    if u >= units {
                        return Err(Error::CoverageCsv(format!("unit {u} out of range")));
                    }
                    row.insert(u);
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        CoverageMatrix::new(unit_names, rows, kind)
    }

    pub fn unit_names(&self) -> &[String] {
        &self.unit_names
    }

    pub fn kind(&self) -> CoverageKind {
        self.kind
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_units(&self) -> usize {
        self.unit_names.len()
    }

    pub fn row(&self, id: usize) -> &FixedBitSet {
        &self.rows[id]
    }

    pub fn row_count(&self, id: usize) -> usize {
        self.rows[id].count_ones(..)
    }

    /// Number of units covered by at least one of `ids`.
    pub fn union_count(&self, ids: &[usize]) -> usize {
        let mut acc = FixedBitSet::with_capacity(self.num_units());
        for &id in ids {
            acc.union_with(&self.rows[id]);
        }
        acc.count_ones(..)
    }

    /// Covered fraction of all units; 0 for a matrix with no units.
    pub fn union_fraction(&self, ids: &[usize]) -> f64 {
        if self.num_units() == 0 {
            return 0.0;
        }
        self.union_count(ids) as f64 / self.num_units() as f64
    }

    pub fn check_pool(&self, pool: &Pool) -> Result<()> {
        if self.num_rows() != pool.len() {
            return Err(Error::MatrixPoolMismatch {
                rows: self.num_rows(),
                pool: pool.len(),
            });
        }
        Ok(())
    }
}

/// Greedy "additional" selection: repeatedly take the row adding the most
/// not-yet-covered units. Ties, including zero-gain steps after saturation,
/// go to the smallest id.
pub fn greedy_select(matrix: &CoverageMatrix, k: usize) -> Result<Vec<usize>> {
    let n = matrix.num_rows();
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    if k > n {
        return Err(Error::KOutOfRange { k, min: 0, max: n });
    }
    let mut covered = FixedBitSet::with_capacity(matrix.num_units());
    let mut taken = vec![false; n];
    let mut order = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, usize)> = None;
        for id in (0..n).filter(|&id| !taken[id]) {
            let gain = matrix.rows[id].difference(&covered).count();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((id, gain));
            }
        }
        let (id, _) = best.expect("k <= n leaves a candidate");
        taken[id] = true;
        covered.union_with(&matrix.rows[id]);
        order.push(id);
    }
    Ok(order)
}

/// Uniform sample of `k` ids without replacement, ascending.
pub fn random_select(pool: &Pool, k: usize, seed: u64) -> Result<Vec<usize>> {
    random_ids(pool.len(), k, seed)
}

pub(crate) fn random_ids(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::KOutOfRange { k, min: 0, max: n });
    }
    let mut ids = random_order(n, seed);
    ids.truncate(k);
    ids.sort_unstable();
    Ok(ids)
}

/// A seeded uniform permutation of `0..n`. Its prefixes are the random
/// selections for every `k`, so one seed yields nested sets.
pub fn random_order(n: usize, seed: u64) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut seed::rng_for(seed, 0));
    ids
}

/// Keeps test cases whose length lies in `[target·(1-tol), target·(1+tol)]`.
///
/// Survivors are renumbered densely; each label becomes the original id,
/// followed by `:` and the original label when there was one.
pub fn length_filter(pool: &Pool, target: usize, tolerance: f64) -> Result<Pool> {
    let kept = length_filter_ids(pool, target, tolerance)?;
    if kept.len() < 2 {
        return Err(Error::FilterTooSmall { kept: kept.len() });
    }
    let entries = kept.into_iter().map(|id| {
        let case = &pool.items()[id];
        let label = match &case.label {
            Some(l) => format!("{id}:{l}"),
            None => id.to_string(),
        };
        (case.payload.clone(), Some(label))
    });
    Ok(Pool::from_entries(entries, pool.codec().clone()))
}

/// Original ids retained by [`length_filter`], ascending.
pub fn length_filter_ids(pool: &Pool, target: usize, tolerance: f64) -> Result<Vec<usize>> {
    if !tolerance.is_finite() || tolerance < 0.0 {
        return Err(Error::InvalidTolerance(tolerance));
    }
    // Absorb representation error such as 100 * 1.1 = 110.00000000000001.
    const SLACK: f64 = 1e-9;
    let lo = target as f64 * (1.0 - tolerance) - SLACK;
    let hi = target as f64 * (1.0 + tolerance) + SLACK;
    Ok(pool
        .items()
        .iter()
        .filter(|c| {
            let len = c.payload.len() as f64;
            len >= lo && len <= hi
        })
        .map(|c| c.id)
        .collect())
}

/// Sorted set view, mostly handy in tests and reports.
pub fn as_set(ids: &[usize]) -> BTreeSet<usize> {
    ids.iter().copied().collect()
}
