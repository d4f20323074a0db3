//! Declarative experiment runs.
//!
//! An [`ExperimentSpec`] names one base pool, one synthetic SUT and a list of
//! experiments; each experiment may override the pool or SUT. All randomness
//! derives from the spec's `seed`. Anything measured with a clock lands under
//! a `timing` key so reports can be compared with those keys stripped.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use super::curves::{compare_curves, random_seeds, CurveComparison, SizeRow, DEFAULT_RANDOM_SEEDS};
use super::length_order_correlation;
use super::runtime::{fit_runtime_model, time_reduction, RuntimeFit, RuntimeObservation};
use super::stats::spearman;
use super::strata::strata_sample;
use crate::compression::CodecId;
use crate::corpus::{generate_pool, load_dir, load_pool, synth_coverage, GeneratorSpec, SutSpec, SyntheticSut};
use crate::distance::Pool;
use crate::error::{Error, Result};
use crate::seed;
use crate::selection::{length_filter, tsdm_reduce, CoverageKind, CoverageMatrix, SelectionSequence};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.90, 0.95, 0.99];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub codec: CodecId,
    pub pool: PoolSpec,
    pub sut: SutSpec,
    pub experiments: Vec<Experiment>,
}

/// Where a pool comes from, optionally narrowed to a length band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<LengthBand>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthBand {
    pub target: usize,
    pub tolerance: f64,
    /// Keep only the first `take` tests inside the band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub take: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Diameter of stratified samples against their coverage.
    Correlation {
        #[serde(default)]
        name: Option<String>,
        strata: usize,
        set_size: usize,
        samples: usize,
        #[serde(default)]
        pool: Option<PoolSpec>,
        #[serde(default)]
        sut: Option<SutSpec>,
    },
    /// Coverage curves of tsdm, greedy and random selection.
    Curves {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        k_max: Option<usize>,
        #[serde(default = "default_runs")]
        random_runs: usize,
        #[serde(default = "default_thresholds")]
        thresholds: Vec<f64>,
        #[serde(default)]
        pool: Option<PoolSpec>,
        #[serde(default)]
        sut: Option<SutSpec>,
    },
    /// Length/selection-order correlation before and after length filtering,
    /// plus curves on the filtered pool.
    LengthConfound {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        pool: Option<PoolSpec>,
        filtered: PoolSpec,
        #[serde(default)]
        k_max: Option<usize>,
        #[serde(default = "default_runs")]
        random_runs: usize,
        #[serde(default = "default_thresholds")]
        thresholds: Vec<f64>,
        #[serde(default)]
        sut: Option<SutSpec>,
    },
    /// Reduction time over growing pools drawn from one generator.
    Runtime {
        #[serde(default)]
        name: Option<String>,
        sizes: Vec<usize>,
        generator: GeneratorSpec,
    },
}

fn default_runs() -> usize {
    DEFAULT_RANDOM_SEEDS
}

fn default_thresholds() -> Vec<f64> {
    DEFAULT_THRESHOLDS.to_vec()
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Correlation { .. } => "correlation",
            Experiment::Curves { .. } => "curves",
            Experiment::LengthConfound { .. } => "length-confound",
            Experiment::Runtime { .. } => "runtime",
        }
    }

    pub fn name(&self, index: usize) -> String {
        let explicit = match self {
            Experiment::Correlation { name, .. }
            | Experiment::Curves { name, .. }
            | Experiment::LengthConfound { name, .. }
            | Experiment::Runtime { name, .. } => name.clone(),
        };
        explicit.unwrap_or_else(|| format!("{index}-{}", self.kind()))
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec {
            location: format!("line {}, column {}", e.line(), e.column()),
            reason: e.to_string(),
        })
    }
}

/// Resolves pools and coverage matrices, caching reductions by pool digest.
pub struct Context<'a> {
    base_dir: &'a Path,
    codec: CodecId,
    sequences: HashMap<String, SelectionSequence>,
}

impl<'a> Context<'a> {
    pub fn new(base_dir: &'a Path, codec: CodecId) -> Self {
        Context {
            base_dir,
            codec,
            sequences: HashMap::new(),
        }
    }

    pub fn pool(&self, spec: &PoolSpec) -> Result<Pool> {
        let sources = spec.manifest.is_some() as usize + spec.dir.is_some() as usize + spec.generate.is_some() as usize;
        if sources != 1 {
            return Err(Error::Spec {
                location: "pool".into(),
                reason: format!("exactly one of manifest, dir, generate is required ({sources} given)"),
            });
        }
        let pool = if let Some(m) = &spec.manifest {
            load_pool(&self.base_dir.join(m), Some(self.codec.clone()))?
        } else if let Some(d) = &spec.dir {
            load_dir(&self.base_dir.join(d), self.codec.clone())?
        } else {
            generate_pool(spec.generate.as_ref().expect("checked"), self.codec.clone())?
        };
        match spec.filter {
            None => Ok(pool),
            Some(band) => {
                let filtered = length_filter(&pool, band.target, band.tolerance)?;
                match band.take {
                    Some(take) if take < filtered.len() => {
                        let ids: Vec<usize> = (0..take).collect();
                        filtered.subpool(&ids)
                    }
                    _ => Ok(filtered),
                }
            }
        }
    }

    /// The reduction of `pool`, computed once per distinct pool.
    pub fn sequence(&mut self, pool: &Pool) -> Result<(SelectionSequence, Option<f64>)> {
        let digest = pool.digest();
        if let Some(seq) = self.sequences.get(&digest) {
            return Ok((seq.clone(), None));
        }
        let start = Instant::now();
        let seq = tsdm_reduce(pool)?;
        let seconds = start.elapsed().as_secs_f64();
        self.sequences.insert(digest, seq.clone());
        Ok((seq, Some(seconds)))
    }
}

pub fn coverage_for(sut: &SutSpec, pool: &Pool) -> Result<CoverageMatrix> {
    Ok(synth_coverage(&SyntheticSut::build(sut)?, pool))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoolSummary {
    pub size: usize,
    pub mean_length: f64,
    pub digest: String,
}

impl PoolSummary {
    pub fn of(pool: &Pool) -> Self {
        PoolSummary {
            size: pool.len(),
            mean_length: pool.mean_length(),
            digest: pool.digest(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleRow {
    pub stratum: usize,
    pub ids: Vec<usize>,
    pub diameter: f64,
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction_seconds: Option<f64>,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub pool: PoolSummary,
    pub coverage_kind: CoverageKind,
    pub strata: usize,
    pub set_size: usize,
    pub n: usize,
    pub spearman: f64,
    pub samples: Vec<SampleRow>,
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvesResult {
    pub pool: PoolSummary,
    pub coverage_kind: CoverageKind,
    pub sizes: Vec<SizeRow>,
    pub comparison: CurveComparison,
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthCorrelation {
    pub pool: PoolSummary,
    pub n: usize,
    pub correlation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthConfoundResult {
    pub unconstrained: LengthCorrelation,
    pub filtered: LengthCorrelation,
    pub band: LengthBand,
    pub filtered_curves: CurvesResult,
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuntimePoint {
    pub n: usize,
    pub s_avg: f64,
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuntimeTiming {
    pub observations: Vec<RuntimeObservation>,
    pub fit: RuntimeFit,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuntimeResult {
    pub points: Vec<RuntimePoint>,
    pub timing: RuntimeTiming,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentResult {
    Correlation(CorrelationResult),
    Curves(CurvesResult),
    LengthConfound(LengthConfoundResult),
    Runtime(RuntimeResult),
}

/// Diameter of every stratified sample, and its rank correlation with the
/// sample's coverage.
pub fn run_correlation(
    pool: &Pool,
    seq: &SelectionSequence,
    matrix: &CoverageMatrix,
    strata: usize,
    set_size: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, Vec<SampleRow>)> {
    let (rho, rows) = run_correlation_rows(pool, seq, Some(matrix), strata, set_size, samples, seed)?;
    Ok((rho.expect("matrix given"), rows))
}

/// As [`run_correlation`], with coverage optional; without a matrix every
/// sample's coverage is 0 and no correlation is computed.
pub fn run_correlation_rows(
    pool: &Pool,
    seq: &SelectionSequence,
    matrix: Option<&CoverageMatrix>,
    strata: usize,
    set_size: usize,
    samples: usize,
    seed: u64,
) -> Result<(Option<f64>, Vec<SampleRow>)> {
    use rayon::prelude::*;
    if let Some(m) = matrix {
        m.check_pool(pool)?;
    }
    let sets = strata_sample(seq, strata, set_size, samples, seed)?;
    let rows: Vec<SampleRow> = sets
        .into_par_iter()
        .map(|s| {
            let diameter = if s.ids.len() < 2 {
                0.0
            } else {
                tsdm_reduce(&pool.subpool(&s.ids)?)?.diameter
            };
            Ok(SampleRow {
                stratum: s.stratum,
                coverage: matrix.map_or(0.0, |m| m.union_fraction(&s.ids)),
                ids: s.ids,
                diameter,
            })
        })
        .collect::<Result<_>>()?;
    let rho = match matrix {
        None => None,
        Some(_) => {
            let xs: Vec<f64> = rows.iter().map(|r| r.diameter).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.coverage).collect();
            Some(spearman(&xs, &ys)?)
        }
    };
    Ok((rho, rows))
}

fn curves_on(
    ctx: &mut Context<'_>,
    pool: &Pool,
    sut: &SutSpec,
    k_max: Option<usize>,
    runs: usize,
    thresholds: &[f64],
    seed: u64,
) -> Result<CurvesResult> {
    let start = Instant::now();
    let matrix = coverage_for(sut, pool)?;
    let (seq, reduction_seconds) = ctx.sequence(pool)?;
    let k_max = k_max.unwrap_or(pool.len());
    let comparison = compare_curves(&seq, &matrix, k_max, &random_seeds(seed, runs))?;
    Ok(CurvesResult {
        pool: PoolSummary::of(pool),
        coverage_kind: matrix.kind(),
        sizes: comparison.size_table(thresholds),
        comparison,
        timing: Timing {
            reduction_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

fn length_correlation(ctx: &mut Context<'_>, pool: &Pool) -> Result<LengthCorrelation> {
    let (seq, _) = ctx.sequence(pool)?;
    Ok(LengthCorrelation {
        pool: PoolSummary::of(pool),
        n: pool.len(),
        correlation: length_order_correlation(&seq, pool)?,
    })
}

/// Runs experiment number `index` of `spec`. Its random streams derive from
/// `(spec.seed, index)`, so inserting an experiment elsewhere in the list
/// changes only streams of the experiments after it.
pub fn run_experiment(ctx: &mut Context<'_>, spec: &ExperimentSpec, index: usize) -> Result<ExperimentResult> {
    let exp = &spec.experiments[index];
    let seed = seed::derive_seed(spec.seed, index as u64);
    info!("running {}", exp.name(index));
    let start = Instant::now();
    match exp {
        Experiment::Correlation {
            strata,
            set_size,
            samples,
            pool,
            sut,
            ..
        } => {
            let pool = ctx.pool(pool.as_ref().unwrap_or(&spec.pool))?;
            let matrix = coverage_for(sut.as_ref().unwrap_or(&spec.sut), &pool)?;
            let (seq, reduction_seconds) = ctx.sequence(&pool)?;
            let (rho, rows) = run_correlation(&pool, &seq, &matrix, *strata, *set_size, *samples, seed)?;
            Ok(ExperimentResult::Correlation(CorrelationResult {
                pool: PoolSummary::of(&pool),
                coverage_kind: matrix.kind(),
                strata: *strata,
                set_size: *set_size,
                n: rows.len(),
                spearman: rho,
                samples: rows,
                timing: Timing {
                    reduction_seconds,
                    total_seconds: start.elapsed().as_secs_f64(),
                },
            }))
        }
        Experiment::Curves {
            k_max,
            random_runs,
            thresholds,
            pool,
            sut,
            ..
        } => {
            let pool = ctx.pool(pool.as_ref().unwrap_or(&spec.pool))?;
            let sut = sut.as_ref().unwrap_or(&spec.sut);
            Ok(ExperimentResult::Curves(curves_on(
                ctx,
                &pool,
                sut,
                *k_max,
                *random_runs,
                thresholds,
                seed,
            )?))
        }
        Experiment::LengthConfound {
            pool,
            filtered,
            k_max,
            random_runs,
            thresholds,
            sut,
            ..
        } => {
            let band = filtered.filter.ok_or_else(|| Error::Spec {
                location: format!("experiments[{index}].filtered"),
                reason: "a length-confound experiment needs a `filter` band".into(),
            })?;
            let wide = ctx.pool(pool.as_ref().unwrap_or(&spec.pool))?;
            let narrow = ctx.pool(filtered)?;
            let unconstrained = length_correlation(ctx, &wide)?;
            let filtered_corr = length_correlation(ctx, &narrow)?;
            let sut = sut.as_ref().unwrap_or(&spec.sut);
            let filtered_curves = curves_on(ctx, &narrow, sut, *k_max, *random_runs, thresholds, seed)?;
            Ok(ExperimentResult::LengthConfound(LengthConfoundResult {
                unconstrained,
                filtered: filtered_corr,
                band,
                filtered_curves,
                timing: Timing {
                    reduction_seconds: None,
                    total_seconds: start.elapsed().as_secs_f64(),
                },
            }))
        }
        Experiment::Runtime { sizes, generator, .. } => {
            let mut points = Vec::with_capacity(sizes.len());
            let mut observations = Vec::with_capacity(sizes.len());
            for &n in sizes {
                let mut gen = generator.clone();
                gen.count = n;
                let pool = generate_pool(&gen, ctx.codec.clone())?;
                let (_, obs) = time_reduction(&pool)?;
                info!("n = {n}: {:.3}s", obs.seconds);
                points.push(RuntimePoint {
                    n,
                    s_avg: obs.s_avg,
                    digest: pool.digest(),
                });
                observations.push(obs);
            }
            let fit = fit_runtime_model(&observations)?;
            Ok(ExperimentResult::Runtime(RuntimeResult {
                points,
                timing: RuntimeTiming {
                    observations,
                    fit,
                    total_seconds: start.elapsed().as_secs_f64(),
                },
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec::parse(
            r#"{
                "seed": 3,
                "pool": {"generate": {"grammar": "random-bytes", "count": 30,
                         "length": {"kind": "uniform", "min": 10, "max": 60},
                         "alphabet": "abcdefgh", "variety": [2, 8], "seed": 1}},
                "sut": {"kind": "ngram-coverage", "width": 2, "units": 64, "alphabet": "abcdefgh"},
                "experiments": [
                    {"kind": "correlation", "strata": 3, "set_size": 4, "samples": 12},
                    {"kind": "curves", "k_max": 20, "random_runs": 3},
                    {"kind": "length-confound",
                     "filtered": {"generate": {"grammar": "random-bytes", "count": 200,
                                  "length": {"kind": "uniform", "min": 10, "max": 60},
                                  "alphabet": "abcdefgh", "variety": [2, 8], "seed": 2},
                                  "filter": {"target": 30, "tolerance": 0.1, "take": 20}}},
                    {"kind": "runtime", "sizes": [6, 8, 10],
                     "generator": {"grammar": "random-bytes", "count": 1,
                                   "length": {"kind": "fixed", "length": 16}}}
                ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn all_kinds_run() {
        let spec = small_spec();
        let mut ctx = Context::new(Path::new("."), spec.codec.clone());
        for i in 0..spec.experiments.len() {
            match run_experiment(&mut ctx, &spec, i) {
                // Tiny runtime pools can time too fast for a meaningful fit.
                Err(Error::Fit(_)) if i == 3 => {}
                Err(e) => panic!("{}: {e}", spec.experiments[i].name(i)),
                Ok(ExperimentResult::Correlation(r)) => {
                    assert_eq!(r.n, 12);
                    assert!(r.samples.iter().all(|s| s.ids.len() == 4));
                }
                Ok(ExperimentResult::Curves(r)) => {
                    assert_eq!(r.comparison.tsdm.points.len(), 20);
                    assert_eq!(r.sizes.len(), 3);
                }
                Ok(ExperimentResult::LengthConfound(r)) => {
                    assert_eq!(r.filtered.n, 20);
                    assert_eq!(r.unconstrained.n, 30);
                }
                Ok(ExperimentResult::Runtime(r)) => assert_eq!(r.points.len(), 3),
            }
        }
    }

    #[test]
    fn correlation_is_reproducible() {
        let spec = small_spec();
        let run = || {
            let mut ctx = Context::new(Path::new("."), spec.codec.clone());
            match run_experiment(&mut ctx, &spec, 0).unwrap() {
                ExperimentResult::Correlation(r) => (r.spearman, r.samples),
                _ => unreachable!(),
            }
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn spec_errors_carry_positions() {
        let err = ExperimentSpec::parse("{\n  \"seed\": 1,\n  \"pool\": 5\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = ExperimentSpec::parse(
            r#"{"pool": {}, "sut": {"kind": "fault-panel", "faults": 4}, "experiments": [], "bogus": 1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn pool_needs_exactly_one_source() {
        let ctx = Context::new(Path::new("."), CodecId::default());
        let empty = PoolSpec {
            manifest: None,
            dir: None,
            generate: None,
            filter: None,
        };
        assert!(ctx.pool(&empty).is_err());
    }
}
