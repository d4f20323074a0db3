//! The `tsdm` command line. Kept as a library so the integration tests can
//! drive it in-process as well as through the binary.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use tsdm_core::corpus::{
    generate_pool, load_dir, load_pool, read_coverage_file, synth_coverage, write_coverage_csv, write_manifest,
    GeneratorSpec, SutSpec, SyntheticSut,
};
use tsdm_core::distance::ncd_multiset_exact;
use tsdm_core::evaluation::experiments::{Context, ExperimentSpec};
use tsdm_core::evaluation::{run_correlation_rows, run_experiment, EvaluationReport, ExperimentOutcome, Status};
use tsdm_core::selection::{greedy_select, length_filter_ids, random_select};
use tsdm_core::{ncd_pair, tsdm_reduce, CodecId, CoverageKind, CoverageMatrix, Pool, SelectionSequence, EXACT_CAP};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "tsdm",
    version,
    about = "Measure test set diversity and select diverse test sets"
)]
pub struct Cli {
    /// Compressor used for every distance [default: zlib]
    #[arg(long, global = true)]
    pub codec: Option<String>,
    /// Compression level, 0-9 [default: 9]
    #[arg(long, global = true)]
    pub level: Option<u32>,
    /// Worker threads [default: available parallelism]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Normalized compression distance between two files
    Ncd { a: PathBuf, b: PathBuf },
    /// Diameter of a whole pool, with the reduction chain as JSON
    Diameter {
        #[command(flatten)]
        pool: PoolArgs,
        /// Also compute the exact value (at most 12 items)
        #[arg(long)]
        exact: bool,
    },
    /// Select k tests from a pool
    Select {
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = SelectMethod::Tsdm)]
        method: SelectMethod,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Coverage matrix CSV (required for greedy)
        #[arg(long)]
        coverage: Option<PathBuf>,
        /// Restrict the pool to lengths within `tolerance` of this target first
        #[arg(long)]
        target_length: Option<usize>,
        #[arg(long, default_value_t = 0.10, requires = "target_length")]
        tolerance: f64,
        /// Manifest of the selected tests
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment spec and write its report
    Eval {
        spec: PathBuf,
        /// Report path [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Curve CSV path [default: next to --out as <name>.curves.csv]
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Write a generated pool as a manifest
    Generate {
        /// Generator spec (JSON)
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coverage matrix of a pool under a synthetic SUT, as CSV
    Coverage {
        #[command(flatten)]
        pool: PoolArgs,
        /// SUT spec (JSON)
        #[arg(long)]
        sut: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified samples over the reduction order, with their diameters
    Sample {
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long, default_value_t = 10)]
        strata: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        set_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Coverage matrix CSV; adds per-sample coverage and the correlation
        #[arg(long)]
        coverage: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct PoolArgs {
    /// JSON-lines manifest
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory; every regular file is one test
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Generator spec (JSON)
    #[arg(long)]
    pub generate: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectMethod {
    Tsdm,
    Random,
    Greedy,
}

/// An error together with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    fn experiment(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_FAILURE,
            error,
        }
    }
}

/// Anything that is not an experiment failure is a problem with the
/// invocation or its inputs.
impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_USAGE,
            error: e.into(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

fn open_out(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

impl Cli {
    /// `None` when neither flag was given, so specs and manifests may carry
    /// their own codec.
    fn codec_override(&self) -> anyhow::Result<Option<CodecId>> {
        if self.codec.is_none() && self.level.is_none() {
            return Ok(None);
        }
        let default = CodecId::default();
        let name = self.codec.as_deref().unwrap_or(default.name());
        let level = self.level.unwrap_or(default.level());
        Ok(Some(CodecId::new(name, level)?))
    }

    fn codec(&self) -> anyhow::Result<CodecId> {
        Ok(self.codec_override()?.unwrap_or_default())
    }
}

impl PoolArgs {
    fn load(&self, codec: Option<CodecId>) -> anyhow::Result<Pool> {
        if let Some(m) = &self.manifest {
            return Ok(load_pool(m, codec)?);
        }
        let codec = codec.unwrap_or_default();
        if let Some(d) = &self.dir {
            return Ok(load_dir(d, codec)?);
        }
        let spec_path = self.generate.as_ref().expect("clap enforces one pool source");
        let spec: GeneratorSpec = read_json(spec_path)?;
        generate_pool(&spec, codec).with_context(|| format!("generator {}", spec_path.display()))
    }

    fn source(&self) -> Value {
        match (&self.manifest, &self.dir, &self.generate) {
            (Some(p), _, _) => json!({ "manifest": p }),
            (_, Some(p), _) => json!({ "dir": p }),
            (_, _, Some(p)) => json!({ "generate": p }),
            _ => Value::Null,
        }
    }
}

fn require_pair(pool: &Pool) -> anyhow::Result<()> {
    if pool.len() < 2 {
        bail!("pool must contain at least 2 items (got {})", pool.len());
    }
    Ok(())
}

pub fn run(cli: Cli) -> CliResult {
    if let Some(threads) = cli.threads {
        // Fails only if the global pool already exists (repeat in-process
        // runs); the first setting then stays in force.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match &cli.command {
        Command::Ncd { a, b } => cmd_ncd(&cli, a, b),
        Command::Diameter { pool, exact } => cmd_diameter(&cli, pool, *exact),
        Command::Select {
            pool,
            k,
            method,
            seed,
            coverage,
            target_length,
            tolerance,
            out,
        } => cmd_select(
            &cli,
            SelectArgs {
                pool,
                k: *k,
                method: *method,
                seed: *seed,
                coverage: coverage.as_deref(),
                band: target_length.map(|t| (t, *tolerance)),
                out: out.as_deref(),
            },
        ),
        Command::Eval { spec, out, curves } => cmd_eval(&cli, spec, out.as_deref(), curves.as_deref()),
        Command::Generate { spec, out } => cmd_generate(&cli, spec, out),
        Command::Coverage { pool, sut, out } => cmd_coverage(&cli, pool, sut, out.as_deref()),
        Command::Sample {
            pool,
            strata,
            samples,
            set_size,
            seed,
            coverage,
            out,
        } => cmd_sample(
            &cli,
            pool,
            (*strata, *samples, *set_size, *seed),
            coverage.as_deref(),
            out.as_deref(),
        ),
    }
}

fn cmd_ncd(cli: &Cli, a: &Path, b: &Path) -> CliResult {
    let x = fs::read(a).with_context(|| format!("cannot read {}", a.display()))?;
    let y = fs::read(b).with_context(|| format!("cannot read {}", b.display()))?;
    let d = ncd_pair(&cli.codec()?, &x, &y)?;
    println!("{}", d.value());
    Ok(())
}

#[derive(Serialize)]
struct DiameterOutput {
    codec: CodecId,
    pool_size: usize,
    pool_digest: String,
    diameter: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<f64>,
    sequence: SelectionSequence,
}

fn cmd_diameter(cli: &Cli, pool_args: &PoolArgs, exact: bool) -> CliResult {
    let pool = pool_args.load(cli.codec_override()?)?;
    require_pair(&pool)?;
    if exact && pool.len() > EXACT_CAP {
        return Err(anyhow!(
            "--exact supports at most {EXACT_CAP} items, the pool has {}; \
             drop --exact to use the chain approximation",
            pool.len()
        )
        .into());
    }
    let seq = tsdm_reduce(&pool)?;
    let exact = if exact {
        let ids: Vec<usize> = pool.ids().collect();
        Some(ncd_multiset_exact(&pool, &ids)?.value())
    } else {
        None
    };
    emit_json(
        &mut io::stdout().lock(),
        &DiameterOutput {
            codec: pool.codec().clone(),
            pool_size: pool.len(),
            pool_digest: pool.digest(),
            diameter: seq.diameter,
            exact,
            sequence: seq,
        },
    )?;
    Ok(())
}

struct SelectArgs<'a> {
    pool: &'a PoolArgs,
    k: usize,
    method: SelectMethod,
    seed: u64,
    coverage: Option<&'a Path>,
    band: Option<(usize, f64)>,
    out: Option<&'a Path>,
}

#[derive(Serialize)]
struct SelectOutput {
    method: SelectMethod,
    k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    codec: CodecId,
    pool_digest: String,
    /// Size of the pool selection ran on, after any length filter.
    candidates: usize,
    /// Ids in the input pool, in method order.
    ids: Vec<usize>,
}

fn cmd_select(cli: &Cli, args: SelectArgs<'_>) -> CliResult {
    let pool = args.pool.load(cli.codec_override()?)?;
    let matrix = match args.coverage {
        Some(path) => {
            let m = read_coverage_file(path, CoverageKind::Structural)
                .with_context(|| format!("coverage matrix {}", path.display()))?;
            m.check_pool(&pool)?;
            Some(m)
        }
        None if args.method == SelectMethod::Greedy => {
            return Err(anyhow!("--method greedy needs a coverage matrix (--coverage)").into())
        }
        None => None,
    };
    // Candidate ids in the input pool.
    let candidates: Vec<usize> = match args.band {
        Some((target, tol)) => length_filter_ids(&pool, target, tol)?,
        None => pool.ids().collect(),
    };
    let sub = pool.subpool(&candidates)?;
    require_pair(&sub)?;

    let local = match args.method {
        SelectMethod::Tsdm => tsdm_reduce(&sub)?.select_k(args.k)?,
        SelectMethod::Random => random_select(&sub, args.k, args.seed)?,
        SelectMethod::Greedy => {
            let m = matrix.expect("checked above");
            let rows: Vec<_> = candidates.iter().map(|&id| m.row(id).clone()).collect();
            let sub_matrix = CoverageMatrix::new(m.unit_names().to_vec(), rows, m.kind())?;
            greedy_select(&sub_matrix, args.k)?
        }
    };
    let ids: Vec<usize> = local.iter().map(|&i| candidates[i]).collect();

    if let Some(path) = args.out {
        let selected = pool.subpool(&ids)?;
        let mut meta = BTreeMap::new();
        meta.insert("method".into(), json!(args.method));
        meta.insert("k".into(), json!(args.k));
        if args.method == SelectMethod::Random {
            meta.insert("seed".into(), json!(args.seed));
        }
        meta.insert("source".into(), args.pool.source());
        meta.insert("source_digest".into(), json!(pool.digest()));
        meta.insert("source_ids".into(), json!(ids));
        write_manifest(&selected, path, meta)?;
    }
    emit_json(
        &mut io::stdout().lock(),
        &SelectOutput {
            method: args.method,
            k: args.k,
            seed: (args.method == SelectMethod::Random).then_some(args.seed),
            codec: pool.codec().clone(),
            pool_digest: pool.digest(),
            candidates: candidates.len(),
            ids,
        },
    )?;
    Ok(())
}

fn curves_path(out: Option<&Path>, curves: Option<&Path>) -> Option<PathBuf> {
    if let Some(c) = curves {
        return Some(c.to_path_buf());
    }
    let out = out?;
    let stem = out.file_stem()?.to_string_lossy();
    Some(out.with_file_name(format!("{stem}.curves.csv")))
}

fn cmd_eval(cli: &Cli, spec_path: &Path, out: Option<&Path>, curves: Option<&Path>) -> CliResult {
    let text = fs::read_to_string(spec_path).with_context(|| format!("cannot read {}", spec_path.display()))?;
    let mut spec =
        ExperimentSpec::parse(&text).with_context(|| format!("invalid experiment spec {}", spec_path.display()))?;
    if let Some(codec) = cli.codec_override()? {
        spec.codec = codec;
    }
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let mut ctx = Context::new(base, spec.codec.clone());
    let base_pool = ctx.pool(&spec.pool);
    let pool_digest = base_pool.as_ref().ok().map(Pool::digest);
    if let Err(e) = &base_pool {
        log::warn!("base pool: {e}");
    }

    let mut outcomes = Vec::with_capacity(spec.experiments.len());
    for (i, exp) in spec.experiments.iter().enumerate() {
        let (status, error, result) = match run_experiment(&mut ctx, &spec, i) {
            Ok(r) => (Status::Ok, None, Some(r)),
            Err(e) => {
                log::error!("{}: {e}", exp.name(i));
                (Status::Failed, Some(e.to_string()), None)
            }
        };
        outcomes.push(ExperimentOutcome {
            name: exp.name(i),
            kind: exp.kind().to_string(),
            status,
            error,
            result,
        });
    }
    let report = EvaluationReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        codec: spec.codec.clone(),
        pool_digest,
        config: spec,
        experiments: outcomes,
    };
    emit_json(&mut *open_out(out)?, &report)?;
    if let Some(path) = curves_path(out, curves) {
        let file = fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        report.write_curves_csv(io::BufWriter::new(file))?;
    }
    match report.failed() {
        0 => Ok(()),
        n => Err(Failure::experiment(anyhow!(
            "{n} of {} experiments failed",
            report.experiments.len()
        ))),
    }
}

fn cmd_generate(cli: &Cli, spec_path: &Path, out: &Path) -> CliResult {
    let spec: GeneratorSpec = read_json(spec_path)?;
    let pool = generate_pool(&spec, cli.codec()?)?;
    let mut meta = BTreeMap::new();
    meta.insert("generator".into(), serde_json::to_value(&spec)?);
    write_manifest(&pool, out, meta)?;
    eprintln!(
        "wrote {} tests to {} (digest {})",
        pool.len(),
        out.display(),
        pool.digest()
    );
    Ok(())
}

fn cmd_coverage(cli: &Cli, pool_args: &PoolArgs, sut_path: &Path, out: Option<&Path>) -> CliResult {
    let pool = pool_args.load(cli.codec_override()?)?;
    let spec: SutSpec = read_json(sut_path)?;
    let matrix = synth_coverage(&SyntheticSut::build(&spec)?, &pool);
    write_coverage_csv(&matrix, open_out(out)?)?;
    Ok(())
}

#[derive(Serialize)]
struct SampleOutput {
    pool_digest: String,
    strata: usize,
    set_size: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    spearman: Option<f64>,
    samples: Vec<Value>,
}

fn cmd_sample(
    cli: &Cli,
    pool_args: &PoolArgs,
    (strata, samples, set_size, seed): (usize, usize, usize, u64),
    coverage: Option<&Path>,
    out: Option<&Path>,
) -> CliResult {
    let pool = pool_args.load(cli.codec_override()?)?;
    require_pair(&pool)?;
    let matrix = match coverage {
        Some(path) => Some(
            read_coverage_file(path, CoverageKind::Structural)
                .with_context(|| format!("coverage matrix {}", path.display()))?,
        ),
        None => None,
    };
    let seq = tsdm_reduce(&pool)?;
    let (spearman, rows) = run_correlation_rows(&pool, &seq, matrix.as_ref(), strata, set_size, samples, seed)?;
    let samples = rows
        .into_iter()
        .map(|r| {
            let mut v = json!({ "stratum": r.stratum, "ids": r.ids, "diameter": r.diameter });
            if matrix.is_some() {
                v["coverage"] = json!(r.coverage);
            }
            v
        })
        .collect();
    emit_json(
        &mut *open_out(out)?,
        &SampleOutput {
            pool_digest: pool.digest(),
            strata,
            set_size,
            seed,
            spearman,
            samples,
        },
    )?;
    Ok(())
}
