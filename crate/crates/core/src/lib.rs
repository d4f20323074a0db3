//! Test-set diversity via compression distance, and diversity-driven test
//! selection.
//!
//! ```
//! use tsdm_core::{tsdm_reduce, CodecId, Pool};
//!
//! let pool = Pool::new(
//!     vec![b"<a><b/></a>".to_vec(), b"<a><b/></a>".to_vec(), b"(x|y)*z".to_vec()],
//!     CodecId::default(),
//! );
//! let seq = tsdm_reduce(&pool).unwrap();
//! // One of the two duplicates goes first.
//! assert!(seq.removal_order[0] < 2);
//! assert_eq!(seq.select_k(2).unwrap().len(), 2);
//! ```

pub mod compression;
pub mod corpus;
pub mod distance;
pub mod error;
pub mod evaluation;
pub mod seed;
pub mod selection;

pub use compression::{compressed_length, concat_length, CodecId, CompressedLength};
pub use distance::{ncd1, ncd_multiset_exact, ncd_pair, Distance, Pool, TestCase, EXACT_CAP};
pub use error::{Error, Result};
pub use evaluation::{
    compare_curves, fit_runtime_model, length_order_correlation, size_to_reach, spearman, strata_sample, CoverageCurve,
    EvaluationReport, Method, RuntimeObservation,
};
pub use selection::{
    greedy_select, length_filter, random_select, select_k, tsdm_reduce, CoverageKind, CoverageMatrix, SelectionSequence,
};
