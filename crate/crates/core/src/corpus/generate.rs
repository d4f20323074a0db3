//! Seeded synthetic test-input generators.
//!
//! Each payload is drawn from its own stream `derive_seed(seed, index)`, so
//! a pool is a pure function of its [`GeneratorSpec`]. Every grammar hits the
//! requested length exactly. `variety` sets how many distinct symbols (bytes,
//! tag names, or regex literals) a single payload may draw on; a range gives
//! pools where some inputs are far more varied than others at equal length.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compression::CodecId;
use crate::distance::Pool;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grammar {
    BalancedXmlLike,
    RegexLike,
    RandomBytes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LengthDist {
    Fixed {
        length: usize,
    },
    /// Inclusive on both ends.
    Uniform {
        min: usize,
        max: usize,
    },
}

impl LengthDist {
    fn bounds(&self) -> (usize, usize) {
        match *self {
            LengthDist::Fixed { length } => (length, length),
            LengthDist::Uniform { min, max } => (min, max),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let (lo, hi) = self.bounds();
        rng.gen_range(lo..=hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub grammar: Grammar,
    pub count: usize,
    pub length: LengthDist,
    #[serde(default)]
    pub seed: u64,
    /// Symbol set for `random-bytes` (and literals of `regex-like`).
    /// Defaults to all 256 byte values for `random-bytes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<String>,
    /// Per-payload number of distinct symbols, `[min, max]` inclusive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variety: Option<[usize; 2]>,
    /// `random-bytes` only: each payload tiles a random motif whose length
    /// is a fraction of the payload length, drawn per payload from this
    /// inclusive range. Varies information content independently of length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motif: Option<[f64; 2]>,
}

/// Tag vocabulary of the XML-like grammar.
pub const XML_TAGS: &[&str] = &[
    "math", "mrow", "mi", "mo", "mn", "msup", "msub", "mfrac", "msqrt", "mtext", "mspace", "mtable", "mtr", "mtd",
    "mover", "munder",
];
const XML_TEXT: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789+-=";
const REGEX_LITERALS: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

fn gen_err(msg: impl Into<String>) -> Error {
    Error::Generation(msg.into())
}

impl GeneratorSpec {
    fn base_alphabet(&self) -> Vec<u8> {
        match (&self.alphabet, self.grammar) {
            (Some(a), _) => {
                let mut v = a.as_bytes().to_vec();
                v.sort_unstable();
                v.dedup();
                v
            }
            (None, Grammar::RandomBytes) => (0..=255).collect(),
            (None, Grammar::RegexLike) => REGEX_LITERALS.to_vec(),
            // Tag names come from `XML_TAGS` instead.
            (None, Grammar::BalancedXmlLike) => Vec::new(),
        }
    }

    fn symbol_universe(&self) -> usize {
        match self.grammar {
            Grammar::BalancedXmlLike => XML_TAGS.len(),
            _ => self.base_alphabet().len(),
        }
    }

    fn variety_range(&self) -> Result<(usize, usize)> {
        let universe = self.symbol_universe();
        let (lo, hi) = match self.variety {
            Some([lo, hi]) => (lo, hi),
            None => (universe, universe),
        };
        if lo == 0 || lo > hi || hi > universe {
            return Err(gen_err(format!(
                "variety [{lo}, {hi}] must satisfy 1 <= min <= max <= {universe}"
            )));
        }
        Ok((lo, hi))
    }

    fn min_length(&self) -> usize {
        match self.grammar {
            Grammar::RandomBytes => 0,
            Grammar::RegexLike => 1,
            // Shortest element `<mi></mi>`.
            Grammar::BalancedXmlLike => {
                let shortest = XML_TAGS.iter().map(|t| t.len()).min().unwrap_or(1);
                2 * shortest + 5
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(gen_err("count must be >= 1"));
        }
        let (lo, hi) = self.length.bounds();
        if lo > hi {
            return Err(gen_err(format!("length range {lo}..={hi} is empty")));
        }
        if hi < self.min_length() {
            return Err(gen_err(format!(
                "no length in {lo}..={hi} fits {:?}, which needs at least {} bytes",
                self.grammar,
                self.min_length()
            )));
        }
        if self.alphabet.as_deref() == Some("") {
            return Err(gen_err("alphabet must not be empty"));
        }
        self.variety_range()?;
        if let Some([lo, hi]) = self.motif {
            if self.grammar != Grammar::RandomBytes {
                return Err(gen_err("motif applies to random-bytes only"));
            }
            if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
                return Err(gen_err(format!("motif [{lo}, {hi}] must satisfy 0 < min <= max <= 1")));
            }
        }
        Ok(())
    }
}

/// Generates a pool; fails when the length distribution cannot be honoured.
pub fn generate_pool(spec: &GeneratorSpec, codec: CodecId) -> Result<Pool> {
    Ok(Pool::new(generate_payloads(spec)?, codec))
}

pub fn generate_payloads(spec: &GeneratorSpec) -> Result<Vec<Vec<u8>>> {
    spec.validate()?;
    let base = spec.base_alphabet();
    let (vlo, vhi) = spec.variety_range()?;
    let min_len = spec.min_length();
    (0..spec.count as u64)
        .map(|i| {
            let mut rng = seed::rng_for(spec.seed, i);
            // Lengths below the grammar minimum are redrawn from the feasible part.
            let mut len = spec.length.sample(&mut rng);
            if len < min_len {
                let (_, hi) = spec.length.bounds();
                len = rng.gen_range(min_len..=hi);
            }
            let variety = rng.gen_range(vlo..=vhi);
            Ok(match spec.grammar {
                Grammar::RandomBytes => {
                    let period = spec.motif.map(|[lo, hi]| {
                        let frac = rng.gen_range(lo..=hi);
                        ((len as f64 * frac).ceil() as usize).max(1)
                    });
                    let bytes = random_bytes(&mut rng, &base, variety, period.map_or(len, |p| p.min(len)));
                    match period {
                        Some(_) => bytes.iter().copied().cycle().take(len).collect(),
                        None => bytes,
                    }
                }
                Grammar::RegexLike => regex_like(&mut rng, &base, variety, len),
                Grammar::BalancedXmlLike => xml_like(&mut rng, variety, len),
            })
        })
        .collect()
}

fn pick_subset(rng: &mut ChaCha8Rng, base: &[u8], k: usize) -> Vec<u8> {
    let mut symbols = base.to_vec();
    symbols.shuffle(rng);
    symbols.truncate(k);
    symbols
}

fn random_bytes(rng: &mut ChaCha8Rng, base: &[u8], variety: usize, len: usize) -> Vec<u8> {
    let symbols = pick_subset(rng, base, variety);
    (0..len).map(|_| *symbols.choose(rng).expect("non-empty")).collect()
}

fn xml_like(rng: &mut ChaCha8Rng, variety: usize, len: usize) -> Vec<u8> {
    let mut tags: Vec<&str> = XML_TAGS.to_vec();
    tags.shuffle(rng);
    tags.truncate(variety);
    let text_variety = rng.gen_range(4..=12);
    let text = pick_subset(rng, XML_TEXT, text_variety);

    let pair_cost = |t: &str| 2 * t.len() + 5;
    let mut root = *tags.choose(rng).expect("non-empty");
    if pair_cost(root) > len {
        root = XML_TAGS.iter().copied().min_by_key(|t| t.len()).expect("non-empty");
    }

    let mut out: Vec<u8> = Vec::with_capacity(len);
    let mut stack: Vec<&str> = vec![root];
    out.extend_from_slice(format!("<{root}>").as_bytes());
    let mut closing = root.len() + 3;

    while out.len() + closing < len {
        let avail = len - out.len() - closing;
        let tag = *tags.choose(rng).expect("non-empty");
        let roll = rng.gen_range(0..10);
        if roll < 3 && stack.len() < 8 && pair_cost(tag) <= avail {
            out.extend_from_slice(format!("<{tag}>").as_bytes());
            stack.push(tag);
            closing += tag.len() + 3;
        } else if roll == 3 && tag.len() + 3 <= avail {
            out.extend_from_slice(format!("<{tag}/>").as_bytes());
        } else if roll < 6 && stack.len() > 1 {
            let top = stack.pop().expect("non-empty");
            out.extend_from_slice(format!("</{top}>").as_bytes());
            closing -= top.len() + 3;
        } else {
            let run = rng.gen_range(1..=6).min(avail);
            for _ in 0..run {
                out.push(*text.choose(rng).expect("non-empty"));
            }
        }
    }
    while let Some(top) = stack.pop() {
        out.extend_from_slice(format!("</{top}>").as_bytes());
    }
    debug_assert_eq!(out.len(), len);
    out
}

fn regex_like(rng: &mut ChaCha8Rng, base: &[u8], variety: usize, len: usize) -> Vec<u8> {
    let literals = pick_subset(rng, base, variety);
    let mut out: Vec<u8> = Vec::with_capacity(len);
    let mut open_groups = 0usize;
    let mut after_atom = false;

    if len >= 2 && rng.gen_bool(0.2) {
        out.push(b'^');
    }
    while out.len() + open_groups < len {
        let avail = len - out.len() - open_groups;
        let roll = rng.gen_range(0..12);
        match roll {
            0 if after_atom => {
                out.push(*b"*+?".choose(rng).expect("non-empty"));
                after_atom = false;
            }
            1 if avail >= 3 && open_groups < 4 => {
                out.push(b'(');
                open_groups += 1;
                after_atom = false;
            }
            2 if open_groups > 0 && after_atom => {
                out.push(b')');
                open_groups -= 1;
                after_atom = true;
            }
            3 if open_groups > 0 && after_atom && avail >= 2 => {
                out.push(b'|');
                after_atom = false;
            }
            4 if avail >= 4 => {
                let width = rng.gen_range(2..=(avail - 2).min(4));
                out.push(b'[');
                for _ in 0..width {
                    out.push(*literals.choose(rng).expect("non-empty"));
                }
                out.push(b']');
                after_atom = true;
            }
            5 if avail >= 2 => {
                out.push(b'\\');
                out.push(*b"dws".choose(rng).expect("non-empty"));
                after_atom = true;
            }
            6 => {
                out.push(b'.');
                after_atom = true;
            }
            _ => {
                out.push(*literals.choose(rng).expect("non-empty"));
                after_atom = true;
            }
        }
    }
    out.extend(std::iter::repeat_n(b')', open_groups));
    debug_assert_eq!(out.len(), len);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(grammar: Grammar, count: usize, length: LengthDist, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            grammar,
            count,
            length,
            seed,
            alphabet: None,
            variety: None,
            motif: None,
        }
    }

    /// Checks tags nest properly; text and self-closing tags are ignored.
    fn balanced(doc: &[u8]) -> bool {
        let text = std::str::from_utf8(doc).unwrap();
        let mut stack = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find('<') {
            let end = match rest[start..].find('>') {
                Some(e) => start + e,
                None => return false,
            };
            let tag = &rest[start + 1..end];
            if let Some(name) = tag.strip_prefix('/') {
                if stack.pop() != Some(name) {
                    return false;
                }
            } else if !tag.ends_with('/') {
                stack.push(tag);
            }
            rest = &rest[end + 1..];
        }
        stack.is_empty()
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(Grammar::RandomBytes, 250, LengthDist::Uniform { min: 50, max: 500 }, 7);
        let a = generate_payloads(&s).unwrap();
        assert_eq!(a, generate_payloads(&s).unwrap());
        assert!(a.iter().all(|p| (50..=500).contains(&p.len())));
        let other = GeneratorSpec { seed: 8, ..s };
        assert_ne!(a, generate_payloads(&other).unwrap());
    }

    #[test]
    fn fixed_length_is_exact() {
        let s = spec(Grammar::RandomBytes, 1000, LengthDist::Fixed { length: 200 }, 3);
        let pool = generate_pool(&s, CodecId::default()).unwrap();
        assert_eq!(pool.mean_length(), 200.0);
        for g in [Grammar::BalancedXmlLike, Grammar::RegexLike] {
            let s = spec(g, 50, LengthDist::Fixed { length: 64 }, 1);
            assert!(generate_payloads(&s).unwrap().iter().all(|p| p.len() == 64));
        }
    }

    #[test]
    fn variety_limits_distinct_symbols() {
        let s = GeneratorSpec {
            alphabet: Some("abcdefghijklmnop".into()),
            variety: Some([2, 3]),
            ..spec(Grammar::RandomBytes, 40, LengthDist::Fixed { length: 300 }, 5)
        };
        for p in generate_payloads(&s).unwrap() {
            let mut distinct = p.clone();
            distinct.sort_unstable();
            distinct.dedup();
            assert!((2..=3).contains(&distinct.len()), "{distinct:?}");
            assert!(distinct.iter().all(|b| (b'a'..=b'p').contains(b)));
        }
    }

    #[test]
    fn unsatisfiable_specs_are_rejected() {
        let cases = [
            spec(Grammar::RandomBytes, 0, LengthDist::Fixed { length: 5 }, 0),
            spec(Grammar::RandomBytes, 3, LengthDist::Uniform { min: 9, max: 5 }, 0),
            spec(Grammar::BalancedXmlLike, 3, LengthDist::Fixed { length: 4 }, 0),
            spec(Grammar::RegexLike, 3, LengthDist::Fixed { length: 0 }, 0),
            GeneratorSpec {
                variety: Some([0, 3]),
                ..spec(Grammar::RandomBytes, 3, LengthDist::Fixed { length: 5 }, 0)
            },
            GeneratorSpec {
                variety: Some([1, 17]),
                ..spec(Grammar::BalancedXmlLike, 3, LengthDist::Fixed { length: 50 }, 0)
            },
            GeneratorSpec {
                motif: Some([0.0, 0.5]),
                ..spec(Grammar::RandomBytes, 3, LengthDist::Fixed { length: 50 }, 0)
            },
            GeneratorSpec {
                motif: Some([0.5, 0.5]),
                ..spec(Grammar::RegexLike, 3, LengthDist::Fixed { length: 50 }, 0)
            },
        ];
        for s in cases {
            assert!(matches!(generate_payloads(&s), Err(Error::Generation(_))), "{s:?}");
        }
    }

    #[test]
    fn motif_payloads_repeat_with_the_drawn_period() {
        let s = GeneratorSpec {
            motif: Some([0.25, 0.25]),
            ..spec(Grammar::RandomBytes, 20, LengthDist::Fixed { length: 100 }, 8)
        };
        for p in generate_payloads(&s).unwrap() {
            assert_eq!(p.len(), 100);
            assert!((25..100).all(|i| p[i] == p[i - 25]));
        }
        let full = GeneratorSpec {
            motif: Some([1.0, 1.0]),
            ..spec(Grammar::RandomBytes, 5, LengthDist::Uniform { min: 1, max: 50 }, 8)
        };
        assert!(generate_payloads(&full)
            .unwrap()
            .iter()
            .all(|p| !p.is_empty() && p.len() <= 50));
    }

    #[test]
    fn short_lengths_are_redrawn_into_the_feasible_range() {
        let s = spec(
            Grammar::BalancedXmlLike,
            100,
            LengthDist::Uniform { min: 0, max: 20 },
            2,
        );
        assert!(generate_payloads(&s)
            .unwrap()
            .iter()
            .all(|p| (9..=20).contains(&p.len())));
    }

    #[test]
    fn spec_json_shape() {
        let s: GeneratorSpec = serde_json::from_str(
            r#"{"grammar":"balanced-xml-like","count":3,"length":{"kind":"uniform","min":20,"max":40},"seed":1}"#,
        )
        .unwrap();
        assert_eq!(s.grammar, Grammar::BalancedXmlLike);
        assert!(serde_json::from_str::<GeneratorSpec>(
            r#"{"grammar":"xml","count":1,"length":{"kind":"fixed","length":1}}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn xml_like_is_always_balanced(seed in any::<u64>(), len in 9usize..400, variety in 1usize..=16) {
            let s = GeneratorSpec {
                variety: Some([variety, variety]),
                ..spec(Grammar::BalancedXmlLike, 3, LengthDist::Fixed { length: len }, seed)
            };
            for doc in generate_payloads(&s).unwrap() {
                prop_assert_eq!(doc.len(), len);
                prop_assert!(balanced(&doc), "{}", String::from_utf8_lossy(&doc));
            }
        }

        #[test]
        fn regex_like_parens_balance(seed in any::<u64>(), len in 1usize..200) {
            let s = spec(Grammar::RegexLike, 3, LengthDist::Fixed { length: len }, seed);
            for re in generate_payloads(&s).unwrap() {
                prop_assert_eq!(re.len(), len);
                let mut depth = 0i32;
                let mut in_class = false;
                for &b in &re {
                    match b {
                        b'[' => in_class = true,
                        b']' => in_class = false,
                        b'(' if !in_class => depth += 1,
                        b')' if !in_class => { depth -= 1; prop_assert!(depth >= 0); }
                        _ => {}
                    }
                }
                prop_assert_eq!(depth, 0);
            }
        }
    }
}
