//! Deterministic stand-ins for an instrumented system under test.
//!
//! `ngram-coverage`: unit `u` is covered by a payload iff the `u`-th n-gram
//! of a seeded universe occurs in it. Longer and more varied inputs cover
//! more units, which is what makes the oracle useful for comparing
//! selection methods.
//!
//! `fault-panel`: each fault is a seeded predicate over the payload
//! (substrings, symbol runs, distinct-symbol counts, length gates). A fault
//! counts as detected by a test when its predicate holds.

use std::collections::HashMap;

use fixedbitset::FixedBitSet;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::Pool;
use crate::error::{Error, Result};
use crate::seed;
use crate::selection::{CoverageKind, CoverageMatrix};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SutSpec {
    NgramCoverage {
        width: usize,
        units: usize,
        /// Defaults to all 256 byte values.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alphabet: Option<String>,
        #[serde(default)]
        seed: u64,
    },
    FaultPanel {
        faults: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alphabet: Option<String>,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FaultPredicate {
    Contains { needle: Vec<u8> },
    ContainsBoth { first: Vec<u8>, second: Vec<u8> },
    SymbolRun { symbol: u8, run: usize },
    DistinctAtLeast { count: usize },
    LongerThanAndContains { length: usize, needle: Vec<u8> },
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    needle.is_empty() || hay.windows(needle.len()).any(|w| w == needle)
}

impl FaultPredicate {
    pub fn detects(&self, payload: &[u8]) -> bool {
        match self {
            FaultPredicate::Contains { needle } => contains(payload, needle),
            FaultPredicate::ContainsBoth { first, second } => contains(payload, first) && contains(payload, second),
            FaultPredicate::SymbolRun { symbol, run } => {
                let mut current = 0usize;
                for &b in payload {
                    current = if b == *symbol { current + 1 } else { 0 };
                    if current >= *run {
                        return true;
                    }
                }
                *run == 0
            }
            FaultPredicate::DistinctAtLeast { count } => {
                let mut seen = [false; 256];
                let mut distinct = 0;
                for &b in payload {
                    if !seen[b as usize] {
                        seen[b as usize] = true;
                        distinct += 1;
                    }
                }
                distinct >= *count
            }
            FaultPredicate::LongerThanAndContains { length, needle } => {
                payload.len() > *length && contains(payload, needle)
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Oracle {
    Ngram {
        width: usize,
        universe: Vec<Vec<u8>>,
        lookup: HashMap<Vec<u8>, usize>,
    },
    Faults(Vec<FaultPredicate>),
}

/// A built synthetic SUT: the spec plus everything derived from its seed.
#[derive(Clone, Debug)]
pub struct SyntheticSut {
    spec: SutSpec,
    unit_names: Vec<String>,
    oracle: Oracle,
}

fn alphabet_of(alphabet: &Option<String>) -> Result<Vec<u8>> {
    let mut symbols: Vec<u8> = match alphabet {
        Some(a) => a.as_bytes().to_vec(),
        None => (0..=255).collect(),
    };
    symbols.sort_unstable();
    symbols.dedup();
    if symbols.is_empty() {
        return Err(Error::InvalidSut("alphabet must not be empty".into()));
    }
    Ok(symbols)
}

impl SyntheticSut {
    pub fn build(spec: &SutSpec) -> Result<Self> {
        match spec {
            SutSpec::NgramCoverage {
                width,
                units,
                alphabet,
                seed,
            } => {
                let symbols = alphabet_of(alphabet)?;
                if *width == 0 {
                    return Err(Error::InvalidSut("n-gram width must be >= 1".into()));
                }
                let total = u32::try_from(*width)
                    .ok()
                    .and_then(|w| symbols.len().checked_pow(w))
                    .filter(|&t| t <= 1 << 40)
                    .ok_or_else(|| Error::InvalidSut("n-gram space too large".into()))?;
                if *units == 0 || *units > total {
                    return Err(Error::InvalidSut(format!(
                        "universe of {units} units does not fit {total} possible {width}-grams"
                    )));
                }
                let mut rng = seed::rng_for(*seed, 0);
                let universe: Vec<Vec<u8>> = index::sample(&mut rng, total, *units)
                    .into_iter()
                    .map(|mut code| {
                        let mut gram = vec![0u8; *width];
                        for slot in gram.iter_mut().rev() {
                            *slot = symbols[code % symbols.len()];
                            code /= symbols.len();
                        }
                        gram
                    })
                    .collect();
                let unit_names = universe
                    .iter()
                    .enumerate()
                    .map(|(u, g)| format!("ng{u:04}_{}", hex::encode(g)))
                    .collect();
                let lookup = universe.iter().enumerate().map(|(u, g)| (g.clone(), u)).collect();
                Ok(SyntheticSut {
                    spec: spec.clone(),
                    unit_names,
                    oracle: Oracle::Ngram {
                        width: *width,
                        universe,
                        lookup,
                    },
                })
            }
            SutSpec::FaultPanel { faults, alphabet, seed } => {
                let symbols = alphabet_of(alphabet)?;
                if *faults == 0 {
                    return Err(Error::InvalidSut("fault panel needs at least one fault".into()));
                }
                let predicates: Vec<FaultPredicate> = (0..*faults as u64)
                    .map(|f| fault_predicate(f, &symbols, &mut seed::rng_for(*seed, f)))
                    .collect();
                let unit_names = (0..*faults).map(|f| format!("fault_{f:02}")).collect();
                Ok(SyntheticSut {
                    spec: spec.clone(),
                    unit_names,
                    oracle: Oracle::Faults(predicates),
                })
            }
        }
    }

    pub fn spec(&self) -> &SutSpec {
        &self.spec
    }

    pub fn unit_names(&self) -> &[String] {
        &self.unit_names
    }

    pub fn kind(&self) -> CoverageKind {
        match self.oracle {
            Oracle::Ngram { .. } => CoverageKind::Structural,
            Oracle::Faults(_) => CoverageKind::Fault,
        }
    }

    /// The n-gram universe, empty for a fault panel.
    pub fn universe(&self) -> &[Vec<u8>] {
        match &self.oracle {
            Oracle::Ngram { universe, .. } => universe,
            Oracle::Faults(_) => &[],
        }
    }

    pub fn faults(&self) -> &[FaultPredicate] {
        match &self.oracle {
            Oracle::Faults(f) => f,
            Oracle::Ngram { .. } => &[],
        }
    }

    pub fn row(&self, payload: &[u8]) -> FixedBitSet {
        let mut row = FixedBitSet::with_capacity(self.unit_names.len());
        match &self.oracle {
            Oracle::Ngram { width, lookup, .. } => {
                for gram in payload.windows(*width) {
                    if let Some(&u) = lookup.get(gram) {
                        row.insert(u);
                    }
                }
            }
            Oracle::Faults(predicates) => {
                for (f, p) in predicates.iter().enumerate() {
                    if p.detects(payload) {
                        row.insert(f);
                    }
                }
            }
        }
        row
    }
}

/// Cycles through predicate shapes so every panel mixes easy and rare faults.
fn fault_predicate(index: u64, symbols: &[u8], rng: &mut rand_chacha::ChaCha8Rng) -> FaultPredicate {
    let needle = |len: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<u8> {
        (0..len).map(|_| *symbols.choose(rng).expect("non-empty")).collect()
    };
    match index % 6 {
        0 => FaultPredicate::Contains { needle: needle(2, rng) },
        1 => FaultPredicate::Contains { needle: needle(3, rng) },
        2 => FaultPredicate::ContainsBoth {
            first: needle(2, rng),
            second: needle(2, rng),
        },
        3 => FaultPredicate::SymbolRun {
            symbol: *symbols.choose(rng).expect("non-empty"),
            run: rng.gen_range(2..=4),
        },
        4 => FaultPredicate::DistinctAtLeast {
            count: rng.gen_range(symbols.len().div_ceil(2)..=symbols.len()),
        },
        _ => FaultPredicate::LongerThanAndContains {
            length: rng.gen_range(40..=120),
            needle: needle(2, rng),
        },
    }
}

/// Runs every payload of `pool` through the oracle.
pub fn synth_coverage(sut: &SyntheticSut, pool: &Pool) -> CoverageMatrix {
    let rows: Vec<FixedBitSet> = pool.items().par_iter().map(|case| sut.row(&case.payload)).collect();
    CoverageMatrix::new(sut.unit_names.clone(), rows, sut.kind()).expect("rows sized to the universe")
}
