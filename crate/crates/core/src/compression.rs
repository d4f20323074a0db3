//! Compressed-length measurement, the stand-in for Kolmogorov complexity.
//!
//! Every distance in this crate is built from `C(x)`, the number of bytes a
//! real compressor emits for `x`. The codec is identified by a [`CodecId`]
//! (name + level) so that reports can record exactly which approximation was
//! used. Concatenations are plain byte-wise joins with no delimiter.
//!
//! DEFLATE-family codecs only look back 32 KiB, so for inputs larger than
//! that window the distance degrades towards 1 regardless of similarity.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use flate2::{Compress, Compression, FlushCompress, Status};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Registered codec names.
pub const CODEC_NAMES: &[&str] = &["zlib", "deflate"];

pub const DEFAULT_CODEC: &str = "zlib";
pub const DEFAULT_LEVEL: u32 = 9;

/// Single inputs above this size exceed the DEFLATE window.
pub const WINDOW_WARN_BYTES: usize = 32 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Backend {
    Zlib,
    RawDeflate,
}

impl Backend {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "zlib" => Some(Backend::Zlib),
            "deflate" => Some(Backend::RawDeflate),
            _ => None,
        }
    }
}

/// A registered codec at a fixed compression level.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawCodecId", into = "RawCodecId")]
pub struct CodecId {
    name: String,
    level: u32,
}

#[derive(Serialize, Deserialize)]
struct RawCodecId {
    name: String,
    level: u32,
}

impl TryFrom<RawCodecId> for CodecId {
    type Error = Error;

    fn try_from(raw: RawCodecId) -> Result<Self> {
        CodecId::new(&raw.name, raw.level)
    }
}

impl From<CodecId> for RawCodecId {
    fn from(id: CodecId) -> Self {
        RawCodecId {
            name: id.name,
            level: id.level,
        }
    }
}

impl CodecId {
    pub fn new(name: &str, level: u32) -> Result<Self> {
        if Backend::from_name(name).is_none() {
            return Err(Error::UnknownCodec(name.to_string()));
        }
        if level > 9 {
            return Err(Error::InvalidLevel {
                name: name.to_string(),
                level,
            });
        }
        Ok(CodecId {
            name: name.to_string(),
            level,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    fn backend(&self) -> Backend {
        // Validated at construction.
        Backend::from_name(&self.name).expect("registered codec")
    }

    /// Compressed length of the empty string, the per-stream overhead `h`.
    pub fn header_overhead(&self) -> CompressedLength {
        compressed_length(self, &[])
    }
}

impl Default for CodecId {
    fn default() -> Self {
        CodecId {
            name: DEFAULT_CODEC.to_string(),
            level: DEFAULT_LEVEL,
        }
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.level)
    }
}

/// Parses `name` or `name:level`.
impl FromStr for CodecId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None => CodecId::new(s, DEFAULT_LEVEL),
            Some((name, level)) => {
                let level = level.parse::<u32>().map_err(|_| Error::InvalidLevel {
                    name: name.to_string(),
                    level: u32::MAX,
                })?;
                CodecId::new(name, level)
            }
        }
    }
}

/// Number of bytes emitted by a codec.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompressedLength(pub usize);

impl CompressedLength {
    pub fn bytes(self) -> usize {
        self.0
    }
}

impl fmt::Display for CompressedLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

struct Engine {
    backend: Backend,
    level: u32,
    stream: Compress,
}

#[derive(Default)]
struct Scratch {
    engine: Option<Engine>,
    out: Vec<u8>,
    joined: Vec<u8>,
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

const OUT_CHUNK: usize = 64 * 1024;

fn run_codec(engine: &mut Option<Engine>, out: &mut Vec<u8>, codec: &CodecId, data: &[u8]) -> usize {
    let backend = codec.backend();
    let reuse = matches!(engine, Some(e) if e.backend == backend && e.level == codec.level);
    if !reuse {
        let zlib_header = backend == Backend::Zlib;
        *engine = Some(Engine {
            backend,
            level: codec.level,
            stream: Compress::new(Compression::new(codec.level), zlib_header),
        });
    }
    let stream = &mut engine.as_mut().expect("engine initialised").stream;
    stream.reset();
    if out.capacity() < OUT_CHUNK {
        out.reserve(OUT_CHUNK);
    }

    let mut input = data;
    let mut total = 0usize;
    loop {
        out.clear();
        let before = stream.total_in();
        let status = stream
            .compress_vec(input, out, FlushCompress::Finish)
            .expect("in-memory deflate cannot fail");
        let consumed = (stream.total_in() - before) as usize;
        input = &input[consumed..];
        total += out.len();
        if status == Status::StreamEnd {
            return total;
        }
    }
}

/// `C(x)`: compressed length of `data` under `codec`.
pub fn compressed_length(codec: &CodecId, data: &[u8]) -> CompressedLength {
    SCRATCH.with(|cell| {
        let scratch = &mut *cell.borrow_mut();
        CompressedLength(run_codec(&mut scratch.engine, &mut scratch.out, codec, data))
    })
}

/// `C(x₁x₂…)`: compressed length of the parts joined in order, no delimiter.
pub fn concat_length<P: AsRef<[u8]>>(codec: &CodecId, parts: &[P]) -> Result<CompressedLength> {
    match parts {
        [] => Err(Error::EmptyConcat),
        [only] => Ok(compressed_length(codec, only.as_ref())),
        _ => Ok(concat_length_iter(codec, parts.iter().map(AsRef::as_ref))),
    }
}

/// Joins an arbitrary sequence of parts into the thread's scratch buffer and
/// compresses it. An empty iterator measures the empty string.
pub(crate) fn concat_length_iter<'a, I>(codec: &CodecId, parts: I) -> CompressedLength
where
    I: IntoIterator<Item = &'a [u8]>,
{
    SCRATCH.with(|cell| {
        let scratch = &mut *cell.borrow_mut();
        let mut joined = std::mem::take(&mut scratch.joined);
        joined.clear();
        for part in parts {
            joined.extend_from_slice(part);
        }
        let len = run_codec(&mut scratch.engine, &mut scratch.out, codec, &joined);
        scratch.joined = joined;
        CompressedLength(len)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bytes(seed: u64, len: usize) -> Vec<u8> {
        let mut v = vec![0u8; len];
        ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut v);
        v
    }

    #[test]
    fn unknown_codec_is_rejected() {
        assert!(matches!(CodecId::new("lzma", 9), Err(Error::UnknownCodec(_))));
        assert!(matches!(CodecId::new("zlib", 10), Err(Error::InvalidLevel { .. })));
        assert!("zlib:x".parse::<CodecId>().is_err());
    }

    #[test]
    fn codec_id_parses_and_displays() {
        let id: CodecId = "deflate:6".parse().unwrap();
        assert_eq!(id.name(), "deflate");
        assert_eq!(id.level(), 6);
        assert_eq!(id.to_string(), "deflate:6");
        assert_eq!("zlib".parse::<CodecId>().unwrap(), CodecId::default());
    }

    #[test]
    fn codec_id_serde_validates() {
        let ok: CodecId = serde_json::from_str(r#"{"name":"zlib","level":1}"#).unwrap();
        assert_eq!(ok.level(), 1);
        assert!(serde_json::from_str::<CodecId>(r#"{"name":"nope","level":1}"#).is_err());
    }

    #[test]
    fn empty_input_is_header_overhead() {
        for name in CODEC_NAMES {
            let codec = CodecId::new(name, 9).unwrap();
            let h = codec.header_overhead();
            assert_eq!(compressed_length(&codec, b""), h);
        }
        // zlib: 2-byte header, empty final block, 4-byte adler32.
        assert_eq!(CodecId::default().header_overhead(), CompressedLength(8));
    }

    #[test]
    fn redundant_input_compresses_far_below_its_length() {
        let data = vec![b'a'; 10_000];
        assert!(compressed_length(&CodecId::default(), &data).bytes() < 100);
    }

    #[test]
    fn self_concatenation_is_exploited() {
        let codec = CodecId::default();
        let h = codec.header_overhead().bytes();
        let x = random_bytes(11, 1024);
        let cx = compressed_length(&codec, &x).bytes();
        let cxx = concat_length(&codec, &[&x, &x]).unwrap().bytes();
        assert!(cxx < 2 * cx, "{cxx} vs {cx}");
        assert!(cxx < 2 * cx - h, "{cxx} vs {cx}, h = {h}");
    }

    #[test]
    fn concat_matches_joined_buffer() {
        let codec = CodecId::default();
        let a = random_bytes(1, 300);
        let b = b"hello hello hello".to_vec();
        let c = random_bytes(2, 50);
        let joined = [a.clone(), b.clone(), c.clone()].concat();
        assert_eq!(
            concat_length(&codec, &[&a, &b, &c]).unwrap(),
            compressed_length(&codec, &joined)
        );
        assert_eq!(concat_length(&codec, &[&a]).unwrap(), compressed_length(&codec, &a));
        assert!(matches!(concat_length::<&[u8]>(&codec, &[]), Err(Error::EmptyConcat)));
    }

    #[test]
    fn codec_switches_do_not_leak_state() {
        let x = random_bytes(5, 2000);
        let zlib = CodecId::default();
        let raw = CodecId::new("deflate", 1).unwrap();
        let first = compressed_length(&zlib, &x);
        let _ = compressed_length(&raw, &x);
        assert_eq!(compressed_length(&zlib, &x), first);
        // zlib wraps raw deflate in 6 bytes of header + checksum.
        let raw9 = CodecId::new("deflate", 9).unwrap();
        assert_eq!(compressed_length(&raw9, &x).bytes() + 6, first.bytes());
    }

    #[test]
    fn large_inputs_need_multiple_output_chunks() {
        let x = random_bytes(9, 200_000);
        let c = compressed_length(&CodecId::default(), &x).bytes();
        assert!(c > x.len() && c < x.len() + 200);
    }

    #[test]
    fn subadditive_within_slack_over_seeded_pairs() {
        let codec = CodecId::default();
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lx = (rng.next_u32() % 2048) as usize;
            let ly = (rng.next_u32() % 2048) as usize;
            let x = random_bytes(seed * 2 + 1000, lx);
            let y = random_bytes(seed * 2 + 1001, ly);
            let cxy = concat_length(&codec, &[&x, &y]).unwrap().bytes();
            let cx = compressed_length(&codec, &x).bytes();
            let cy = compressed_length(&codec, &y).bytes();
            assert!(cxy <= cx + cy + 64, "seed {seed}: {cxy} > {cx} + {cy} + 64");
        }
    }

    proptest! {
        #[test]
        fn deterministic_and_above_overhead(data in proptest::collection::vec(any::<u8>(), 0..3000), level in 0u32..=9) {
            let codec = CodecId::new("zlib", level).unwrap();
            let a = compressed_length(&codec, &data);
            let b = compressed_length(&codec, &data);
            prop_assert_eq!(a, b);
            prop_assert!(a >= codec.header_overhead());
        }

        #[test]
        fn concat_equals_compressing_the_join(parts in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..400), 1..6)) {
            let codec = CodecId::default();
            let joined: Vec<u8> = parts.concat();
            prop_assert_eq!(concat_length(&codec, &parts).unwrap(), compressed_length(&codec, &joined));
        }
    }
}
