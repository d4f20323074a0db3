use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown codec `{0}` (known: {known})", known = crate::compression::CODEC_NAMES.join(", "))]
    UnknownCodec(String),

    #[error("codec `{name}` does not accept level {level} (valid: 0..=9)")]
    InvalidLevel { name: String, level: u32 },

    #[error("concatenation needs at least one part")]
    EmptyConcat,

    #[error("degenerate pair: both payloads are empty")]
    DegeneratePair,

    #[error("{what} needs at least {need} items, got {got}")]
    TooSmall {
        what: &'static str,
        need: usize,
        got: usize,
    },

    #[error(
        "exact multiset distance is capped at {cap} items, got {size}; \
         use the chain approximation (tsdm_reduce) for larger sets"
    )]
    ExactCapExceeded { size: usize, cap: usize },

    #[error("unknown test case id {id} (pool size {len})")]
    UnknownId { id: usize, len: usize },

    #[error("duplicate test case id {0} in subset")]
    DuplicateMember(usize),

    #[error("k = {k} is out of range {min}..={max}")]
    KOutOfRange { k: usize, min: usize, max: usize },

    #[error("coverage matrix is empty")]
    EmptyMatrix,

    #[error("coverage matrix has {rows} rows but the pool has {pool} test cases")]
    MatrixPoolMismatch { rows: usize, pool: usize },

    #[error("invalid tolerance {0}: must be a finite value >= 0")]
    InvalidTolerance(f64),

    #[error("length filter kept {kept} test case(s); selection needs at least 2")]
    FilterTooSmall { kept: usize },

    #[error("manifest {location}: {reason}")]
    Ingestion { location: String, reason: String },

    #[error("experiment spec {location}: {reason}")]
    Spec { location: String, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("invalid SUT parameters: {0}")]
    InvalidSut(String),

    #[error("coverage CSV: {0}")]
    CoverageCsv(String),

    #[error("zero rank variance: input vector is constant")]
    ZeroRankVariance,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid stratification: {0}")]
    Strata(String),

    #[error("runtime fit: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
