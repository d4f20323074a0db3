//! Analysis pipeline: stratified sampling, rank correlation, coverage
//! curves, size-to-threshold tables and runtime fits.

pub mod curves;
pub mod experiments;
pub mod report;
pub mod runtime;
pub mod stats;
pub mod strata;

pub use curves::{
    compare_curves, coverage_curve, mean_size_to_reach, random_seeds, size_to_reach, CoverageCurve, CurveComparison,
    CurvePoint, Method, SizeRow, DEFAULT_RANDOM_SEEDS,
};
pub use experiments::{
    run_correlation, run_correlation_rows, run_experiment, Context, Experiment, ExperimentResult, ExperimentSpec,
    PoolSpec,
};
pub use report::{strip_timing, EvaluationReport, ExperimentOutcome, Status};
pub use runtime::{fit_runtime_model, time_reduction, RuntimeFit, RuntimeObservation};
pub use stats::{midranks, pearson, spearman};
pub use strata::{strata_bounds, strata_sample, StratifiedSample};

use crate::distance::Pool;
use crate::error::{Error, Result};
use crate::selection::SelectionSequence;

/// Rank correlation between payload length and how long a test survives
/// the reduction: its position in the removal order, so tests that are kept
/// into smaller sets score higher. Equivalently, `spearman(length,
/// -first_inclusion_size)`.
pub fn length_order_correlation(seq: &SelectionSequence, pool: &Pool) -> Result<f64> {
    if seq.pool_size != pool.len() || seq.pool_digest != pool.digest() {
        return Err(Error::MatrixPoolMismatch {
            rows: seq.pool_size,
            pool: pool.len(),
        });
    }
    let lengths: Vec<f64> = pool.items().iter().map(|c| c.payload.len() as f64).collect();
    let survival: Vec<f64> = seq.first_inclusion_sizes().into_iter().map(|s| -(s as f64)).collect();
    spearman(&lengths, &survival)
}
