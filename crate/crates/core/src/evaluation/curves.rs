//! Coverage-versus-size curves for the three selection methods.
//!
//! Raw coverage is the fraction of units covered by the union of a selected
//! set. Curves are normalized to the greedy method's maximum, unless another
//! method covers more, in which case that maximum is used instead and the
//! curve records which method set it.

use std::fmt;
use std::io::Write;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::distance::Pool;
use crate::error::{Error, Result};
use crate::seed;
use crate::selection::{greedy_select, random_order, tsdm_reduce, CoverageMatrix, SelectionSequence};

/// Ten repetitions, as in the reference experiments.
pub const DEFAULT_RANDOM_SEEDS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tsdm,
    Greedy,
    Random,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Tsdm => "tsdm",
            Method::Greedy => "greedy",
            Method::Random => "random",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub k: usize,
    pub raw: f64,
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageCurve {
    pub method: Method,
    pub normalizer: f64,
    pub normalizer_method: Method,
    pub points: Vec<CurvePoint>,
}

impl CoverageCurve {
    fn from_raw(method: Method, raw: &[f64], normalizer: f64, normalizer_method: Method) -> Self {
        let points = raw
            .iter()
            .enumerate()
            .map(|(i, &r)| CurvePoint {
                k: i + 1,
                raw: r,
                normalized: if normalizer > 0.0 { r / normalizer } else { 0.0 },
            })
            .collect();
        CoverageCurve {
            method,
            normalizer,
            normalizer_method,
            points,
        }
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.normalized).collect()
    }
}

/// Smallest `k` whose normalized coverage reaches `threshold`.
pub fn size_to_reach(curve: &CoverageCurve, threshold: f64) -> Option<usize> {
    curve.points.iter().find(|p| p.normalized >= threshold).map(|p| p.k)
}

/// Mean of [`size_to_reach`] over several runs; `None` if any run never
/// reaches the threshold.
pub fn mean_size_to_reach(curves: &[CoverageCurve], threshold: f64) -> Option<f64> {
    if curves.is_empty() {
        return None;
    }
    let mut total = 0usize;
    for c in curves {
        total += size_to_reach(c, threshold)?;
    }
    Some(total as f64 / curves.len() as f64)
}

/// Raw coverage after each prefix of `order`.
fn prefix_coverage(matrix: &CoverageMatrix, order: impl Iterator<Item = usize>) -> Vec<f64> {
    let units = matrix.num_units();
    let mut acc = FixedBitSet::with_capacity(units);
    order
        .map(|id| {
            acc.union_with(matrix.row(id));
            if units == 0 {
                0.0
            } else {
                acc.count_ones(..) as f64 / units as f64
            }
        })
        .collect()
}

fn check_k_max(k_max: usize, n: usize) -> Result<()> {
    if k_max == 0 || k_max > n {
        return Err(Error::KOutOfRange {
            k: k_max,
            min: 1,
            max: n,
        });
    }
    Ok(())
}

/// Raw tsdm curve: `k = 1..=k_max` walks the chain from its small end.
pub fn tsdm_raw(seq: &SelectionSequence, matrix: &CoverageMatrix, k_max: usize) -> Vec<f64> {
    prefix_coverage(matrix, seq.full_order().into_iter().rev().take(k_max))
}

pub fn greedy_raw(matrix: &CoverageMatrix, k_max: usize) -> Result<Vec<f64>> {
    Ok(prefix_coverage(matrix, greedy_select(matrix, k_max)?.into_iter()))
}

/// One random run: prefixes of the permutation drawn for `seed`.
pub fn random_raw(matrix: &CoverageMatrix, k_max: usize, seed: u64) -> Vec<f64> {
    prefix_coverage(matrix, random_order(matrix.num_rows(), seed).into_iter().take(k_max))
}

/// The seeds used for `runs` random repetitions under one run seed.
pub fn random_seeds(run_seed: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|i| seed::derive_seed(run_seed, i)).collect()
}

/// All three methods on one pool, normalized together.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveComparison {
    pub k_max: usize,
    pub normalizer: f64,
    pub normalizer_method: Method,
    pub tsdm: CoverageCurve,
    pub greedy: CoverageCurve,
    /// Pointwise mean over `random_runs`.
    pub random: CoverageCurve,
    #[serde(skip)]
    pub random_runs: Vec<CoverageCurve>,
    pub random_seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeRow {
    pub threshold: f64,
    pub tsdm: Option<usize>,
    pub greedy: Option<usize>,
    /// Mean over random runs of each run's size.
    pub random_mean: Option<f64>,
    /// Size read off the averaged random curve.
    pub random_mean_curve: Option<usize>,
    /// `random_mean / tsdm`.
    pub random_over_tsdm: Option<f64>,
}

impl CurveComparison {
    pub fn curve(&self, method: Method) -> &CoverageCurve {
        match method {
            Method::Tsdm => &self.tsdm,
            Method::Greedy => &self.greedy,
            Method::Random => &self.random,
        }
    }

    pub fn size_row(&self, threshold: f64) -> SizeRow {
        let tsdm = size_to_reach(&self.tsdm, threshold);
        let random_mean = mean_size_to_reach(&self.random_runs, threshold);
        SizeRow {
            threshold,
            tsdm,
            greedy: size_to_reach(&self.greedy, threshold),
            random_mean,
            random_mean_curve: size_to_reach(&self.random, threshold),
            random_over_tsdm: match (random_mean, tsdm) {
                (Some(r), Some(t)) => Some(r / t as f64),
                _ => None,
            },
        }
    }

    pub fn size_table(&self, thresholds: &[f64]) -> Vec<SizeRow> {
        thresholds.iter().map(|&t| self.size_row(t)).collect()
    }

    /// Plot-ready rows `k,method,normalized_coverage`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "method", "normalized_coverage"])?;
        for curve in [&self.tsdm, &self.greedy, &self.random] {
            for p in &curve.points {
                w.write_record([p.k.to_string(), curve.method.to_string(), p.normalized.to_string()])?;
            }
        }
        w.flush()
    }
}

fn max_of(raw: &[f64]) -> f64 {
    raw.iter().copied().fold(0.0, f64::max)
}

fn mean_curve(runs: &[Vec<f64>], k_max: usize) -> Vec<f64> {
    (0..k_max)
        .map(|i| runs.iter().map(|r| r[i]).sum::<f64>() / runs.len() as f64)
        .collect()
}

/// Compares tsdm (from `seq`), greedy and random (one run per seed) for
/// `k = 1..=k_max`.
pub fn compare_curves(
    seq: &SelectionSequence,
    matrix: &CoverageMatrix,
    k_max: usize,
    seeds: &[u64],
) -> Result<CurveComparison> {
    if matrix.num_rows() != seq.pool_size {
        return Err(Error::MatrixPoolMismatch {
            rows: matrix.num_rows(),
            pool: seq.pool_size,
        });
    }
    check_k_max(k_max, seq.pool_size)?;
    if seeds.is_empty() {
        return Err(Error::TooSmall {
            what: "random curve seeds",
            need: 1,
            got: 0,
        });
    }
    let tsdm = tsdm_raw(seq, matrix, k_max);
    let greedy = greedy_raw(matrix, k_max)?;
    let runs: Vec<Vec<f64>> = seeds.iter().map(|&s| random_raw(matrix, k_max, s)).collect();
    let random = mean_curve(&runs, k_max);

    let mut normalizer = max_of(&greedy);
    let mut normalizer_method = Method::Greedy;
    for (method, curve_max) in [
        (Method::Tsdm, max_of(&tsdm)),
        (Method::Random, runs.iter().map(|r| max_of(r)).fold(0.0, f64::max)),
    ] {
        if curve_max > normalizer {
            normalizer = curve_max;
            normalizer_method = method;
        }
    }
    let build = |m, raw: &[f64]| CoverageCurve::from_raw(m, raw, normalizer, normalizer_method);
    Ok(CurveComparison {
        k_max,
        normalizer,
        normalizer_method,
        tsdm: build(Method::Tsdm, &tsdm),
        greedy: build(Method::Greedy, &greedy),
        random: build(Method::Random, &random),
        random_runs: runs.iter().map(|r| build(Method::Random, r)).collect(),
        random_seeds: seeds.to_vec(),
    })
}

/// A single method's curve on `pool`, normalized against greedy (or
/// against itself if it covers more). Random curves average over `seeds`.
pub fn coverage_curve(
    method: Method,
    pool: &Pool,
    matrix: &CoverageMatrix,
    k_max: usize,
    seeds: &[u64],
) -> Result<CoverageCurve> {
    matrix.check_pool(pool)?;
    check_k_max(k_max, pool.len())?;
    let greedy = greedy_raw(matrix, k_max)?;
    let raw = match method {
        Method::Greedy => greedy.clone(),
        Method::Tsdm => tsdm_raw(&tsdm_reduce(pool)?, matrix, k_max),
        Method::Random => {
            if seeds.is_empty() {
                return Err(Error::TooSmall {
                    what: "random curve seeds",
                    need: 1,
                    got: 0,
                });
            }
            let runs: Vec<Vec<f64>> = seeds.iter().map(|&s| random_raw(matrix, k_max, s)).collect();
            mean_curve(&runs, k_max)
        }
    };
    let (mut normalizer, mut normalizer_method) = (max_of(&greedy), Method::Greedy);
    if max_of(&raw) > normalizer {
        normalizer = max_of(&raw);
        normalizer_method = method;
    }
    Ok(CoverageCurve::from_raw(method, &raw, normalizer, normalizer_method))
}
