//! Normalized compression distance for pairs and multisets.
//!
//! The information distance `max{K(x|y), K(y|x)} / max{K(x), K(y)}` is not
//! computable; everything here substitutes compressed lengths from
//! [`crate::compression`]:
//!
//! ```text
//! NCD(x, y)  = (C(xy) - min{C(x), C(y)}) / max{C(x), C(y)}
//! NCD1(X)    = (C(X) - min_x C(x)) / max_x C(X \ {x})
//! NCD(X)     = max{ NCD1(X), max_{Y ⊂ X} NCD(Y) },   NCD({x}) = 0
//! ```
//!
//! `C(X)` of a set is the compressed length of its members concatenated in
//! ascending test-case id order. Distances are never clamped: with a real
//! codec they live in `[0, 1 + ε]`. Real codecs also break the metric axioms
//! slightly (the triangle inequality in particular), so nothing here relies
//! on them.

use std::fmt;

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compression::{compressed_length, concat_length_iter, CodecId, WINDOW_WARN_BYTES};
use crate::error::{Error, Result};
use crate::seed;

/// Largest set accepted by [`ncd_multiset_exact`]; the subset lattice has `2^n` nodes.
pub const EXACT_CAP: usize = 12;

/// One test artifact: an input, trace, output, or anything else as bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: usize,
    pub payload: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// An indexed multiset of test cases. Ids are `0..n` in list order and
/// duplicate payloads are allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pool {
    items: Vec<TestCase>,
    codec: CodecId,
}

impl Pool {
    pub fn new<I>(payloads: I, codec: CodecId) -> Self
    where
        I: IntoIterator<Item = Vec<u8>>,
    {
        Self::from_entries(payloads.into_iter().map(|p| (p, None)), codec)
    }

    pub fn from_entries<I>(entries: I, codec: CodecId) -> Self
    where
        I: IntoIterator<Item = (Vec<u8>, Option<String>)>,
    {
        let items: Vec<TestCase> = entries
            .into_iter()
            .enumerate()
            .map(|(id, (payload, label))| TestCase { id, payload, label })
            .collect();
        for case in &items {
            if case.payload.is_empty() {
                warn!("test case {} has an empty payload", describe(case));
            } else if case.payload.len() > WINDOW_WARN_BYTES {
                warn!(
                    "test case {} is {} bytes, larger than the {} byte compression window; \
                     distances involving it are unreliable",
                    describe(case),
                    case.payload.len(),
                    WINDOW_WARN_BYTES
                );
            }
        }
        Pool { items, codec }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn codec(&self) -> &CodecId {
        &self.codec
    }

    pub fn items(&self) -> &[TestCase] {
        &self.items
    }

    pub fn get(&self, id: usize) -> Result<&TestCase> {
        self.items.get(id).ok_or(Error::UnknownId {
            id,
            len: self.items.len(),
        })
    }

    pub fn payload(&self, id: usize) -> &[u8] {
        &self.items[id].payload
    }

    pub fn ids(&self) -> std::ops::Range<usize> {
        0..self.items.len()
    }

    pub fn mean_length(&self) -> f64 {
        if self.items.is_empty() {
            return 0.0;
        }
        self.items.iter().map(|c| c.payload.len()).sum::<usize>() as f64 / self.items.len() as f64
    }

    /// Same test cases measured with a different codec.
    pub fn with_codec(mut self, codec: CodecId) -> Self {
        self.codec = codec;
        self
    }

    /// A new pool holding the given members, renumbered densely in the given order.
    pub fn subpool(&self, ids: &[usize]) -> Result<Pool> {
        let mut items = Vec::with_capacity(ids.len());
        for (new_id, &id) in ids.iter().enumerate() {
            let case = self.get(id)?;
            items.push(TestCase {
                id: new_id,
                payload: case.payload.clone(),
                label: case.label.clone(),
            });
        }
        Ok(Pool {
            items,
            codec: self.codec.clone(),
        })
    }

    /// SHA-256 over the length-prefixed payloads in id order, hex encoded.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.items.len() as u64).to_le_bytes());
        for case in &self.items {
            hasher.update((case.payload.len() as u64).to_le_bytes());
            hasher.update(&case.payload);
        }
        hex::encode(hasher.finalize())
    }

    /// Validates a subset and returns it in canonical (ascending id) order.
    pub fn canonical_subset(&self, ids: &[usize]) -> Result<Vec<usize>> {
        let mut sorted = ids.to_vec();
        sorted.sort_unstable();
        for pair in sorted.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::DuplicateMember(pair[0]));
            }
        }
        if let Some(&last) = sorted.last() {
            self.get(last)?;
        }
        Ok(sorted)
    }
}

fn describe(case: &TestCase) -> String {
    match &case.label {
        Some(label) => format!("{} ({label})", case.id),
        None => case.id.to_string(),
    }
}

/// A normalized compression distance value. Not clamped.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distance(pub f64);

impl Distance {
    pub const ZERO: Distance = Distance(0.0);

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The NCD ratio from integer compressed lengths. Every route to a distance
/// goes through here so equal inputs give bit-identical floats.
pub(crate) fn ncd_ratio(c_all: usize, min_single: usize, max_without: usize) -> f64 {
    (c_all as f64 - min_single as f64) / max_without as f64
}

/// Pairwise NCD with `x` concatenated before `y`.
pub fn ncd_pair(codec: &CodecId, x: &[u8], y: &[u8]) -> Result<Distance> {
    if x.is_empty() && y.is_empty() {
        return Err(Error::DegeneratePair);
    }
    let cx = compressed_length(codec, x).bytes();
    let cy = compressed_length(codec, y).bytes();
    let cxy = concat_length_iter(codec, [x, y]).bytes();
    Ok(Distance(ncd_ratio(cxy, cx.min(cy), cx.max(cy))))
}

/// All the terms of one NCD1 evaluation. Arg ties resolve to the smallest id.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ncd1Detail {
    pub value: Distance,
    pub set_length: usize,
    pub min_single: usize,
    pub min_single_id: usize,
    pub max_without: usize,
    pub max_without_id: usize,
}

/// NCD1 of a subset of `pool`, concatenated in ascending id order.
pub fn ncd1(pool: &Pool, ids: &[usize]) -> Result<Distance> {
    ncd1_detail(pool, ids).map(|d| d.value)
}

pub fn ncd1_detail(pool: &Pool, ids: &[usize]) -> Result<Ncd1Detail> {
    let members = pool.canonical_subset(ids)?;
    if members.len() < 2 {
        return Err(Error::TooSmall {
            what: "NCD1",
            need: 2,
            got: members.len(),
        });
    }
    Ok(ncd1_ordered(pool, &members))
}

/// NCD1 with members concatenated exactly in the order given.
fn ncd1_ordered(pool: &Pool, members: &[usize]) -> Ncd1Detail {
    let codec = pool.codec();
    let set_length = concat_length_iter(codec, members.iter().map(|&i| pool.payload(i))).bytes();

    let (min_single_id, min_single) = members
        .iter()
        .map(|&i| (i, compressed_length(codec, pool.payload(i)).bytes()))
        .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty");

    let without: Vec<(usize, usize)> = members
        .par_iter()
        .map(|&skip| {
            let rest = members.iter().filter(|&&i| i != skip).map(|&i| pool.payload(i));
            (skip, concat_length_iter(codec, rest).bytes())
        })
        .collect();
    let (max_without_id, max_without) = without
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty");

    Ncd1Detail {
        value: Distance(ncd_ratio(set_length, min_single, max_without)),
        set_length,
        min_single,
        min_single_id,
        max_without,
        max_without_id,
    }
}

/// Exact multiset NCD: the maximum NCD1 over every subset of size >= 2,
/// with each subset's compressed length computed once.
pub fn ncd_multiset_exact(pool: &Pool, ids: &[usize]) -> Result<Distance> {
    let members = pool.canonical_subset(ids)?;
    let n = members.len();
    if n == 0 {
        return Err(Error::TooSmall {
            what: "exact multiset NCD",
            need: 1,
            got: 0,
        });
    }
    if n > EXACT_CAP {
        return Err(Error::ExactCapExceeded {
            size: n,
            cap: EXACT_CAP,
        });
    }
    if n == 1 {
        return Ok(Distance::ZERO);
    }

    let codec = pool.codec();
    let full: u32 = (1u32 << n) - 1;
    // lengths[mask] = C(members selected by mask, ascending id).
    let lengths: Vec<usize> = (0..=full)
        .into_par_iter()
        .map(|mask| {
            if mask == 0 {
                return 0;
            }
            let parts = (0..n)
                .filter(|bit| mask & (1 << bit) != 0)
                .map(|bit| pool.payload(members[bit]));
            concat_length_iter(codec, parts).bytes()
        })
        .collect();

    let best = (1..=full)
        .into_par_iter()
        .filter(|mask| mask.count_ones() >= 2)
        .map(|mask| {
            let bits = (0..n).filter(|bit| mask & (1 << bit) != 0);
            let min_single = bits.clone().map(|bit| lengths[1 << bit]).min().expect("non-empty");
            let max_without = bits
                .map(|bit| lengths[(mask & !(1 << bit)) as usize])
                .max()
                .expect("non-empty");
            ncd_ratio(lengths[mask as usize], min_single, max_without)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(Distance(best))
}

/// Sensitivity of NCD1 to the concatenation order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderSpread {
    pub canonical: f64,
    pub min: f64,
    pub max: f64,
    pub permutations: usize,
}

impl OrderSpread {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

/// Recomputes NCD1 under `permutations` seeded random concatenation orders.
pub fn ncd1_order_spread(pool: &Pool, ids: &[usize], permutations: usize, seed: u64) -> Result<OrderSpread> {
    let canonical = ncd1(pool, ids)?.value();
    let members = pool.canonical_subset(ids)?;
    let values: Vec<f64> = (0..permutations as u64)
        .into_par_iter()
        .map(|p| {
            let mut order = members.clone();
            order.shuffle(&mut seed::rng_for(seed, p));
            ncd1_ordered(pool, &order).value.value()
        })
        .collect();
    let min = values.iter().copied().fold(canonical, f64::min);
    let max = values.iter().copied().fold(canonical, f64::max);
    Ok(OrderSpread {
        canonical,
        min,
        max,
        permutations,
    })
}
