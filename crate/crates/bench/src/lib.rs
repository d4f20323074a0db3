//! Fixture pools shared by the benchmarks.

use tsdm_core::corpus::{generate_pool, GeneratorSpec, Grammar, LengthDist};
use tsdm_core::{CodecId, Pool};

/// `n` random-bytes payloads of exactly `len` bytes over a 16-letter
/// alphabet.
pub fn fixed_pool(n: usize, len: usize, seed: u64) -> Pool {
    let spec = GeneratorSpec {
        grammar: Grammar::RandomBytes,
        count: n,
        length: LengthDist::Fixed { length: len },
        seed,
        alphabet: Some("abcdefghijklmnop".into()),
        variety: Some([4, 16]),
        motif: None,
    };
    generate_pool(&spec, CodecId::default()).expect("valid generator spec")
}
