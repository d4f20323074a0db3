//! JSON-lines manifests and plain-directory ingestion.
//!
//! A manifest is one JSON object per line:
//!
//! ```text
//! {"codec":{"name":"zlib","level":9},"metadata":{"source":"generated"}}
//! {"id":0,"path":"inputs/a.xml","label":"a"}
//! {"id":1,"inline_hex":"3c6d693e"}
//! ```
//!
//! The optional header line (no `id`) carries the codec and free-form
//! metadata. Relative paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::compression::CodecId;
use crate::distance::Pool;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EntrySource {
    Path(PathBuf),
    InlineHex(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: usize,
    pub source: EntrySource,
    pub label: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub codec: Option<CodecId>,
    pub metadata: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryLine {
    id: usize,
    #[serde(default)]
    path: Option<PathBuf>,
    #[serde(default)]
    inline_hex: Option<String>,
    #[serde(default)]
    label: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    codec: Option<CodecId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, Value>,
}

#[derive(Serialize)]
struct InlineLine<'a> {
    id: usize,
    inline_hex: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'a str>,
}

fn ingest_err(location: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Ingestion {
        location: location.into(),
        reason: reason.into(),
    }
}

impl Manifest {
    pub fn parse(text: &str, origin: &str) -> Result<Manifest> {
        let mut manifest = Manifest::default();
        for (lineno, line) in text.lines().enumerate() {
            let location = format!("{origin}:{}", lineno + 1);
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(trimmed).map_err(|e| ingest_err(&location, e.to_string()))?;
            if value.get("id").is_none() {
                if !manifest.entries.is_empty() || manifest.codec.is_some() {
                    return Err(ingest_err(&location, "header line must come first"));
                }
                let header: HeaderLine =
                    serde_json::from_value(value).map_err(|e| ingest_err(&location, e.to_string()))?;
                manifest.codec = header.codec;
                manifest.metadata = header.metadata;
                continue;
            }
            let entry: EntryLine = serde_json::from_value(value).map_err(|e| ingest_err(&location, e.to_string()))?;
            let source = match (entry.path, entry.inline_hex) {
                (Some(p), None) => EntrySource::Path(p),
                (None, Some(h)) => EntrySource::InlineHex(h),
                _ => {
                    return Err(ingest_err(
                        format!("{location} (id {})", entry.id),
                        "exactly one of `path` or `inline_hex` is required",
                    ))
                }
            };
            manifest.entries.push(ManifestEntry {
                id: entry.id,
                source,
                label: entry.label,
            });
        }

        manifest.entries.sort_by_key(|e| e.id);
        for (expected, entry) in manifest.entries.iter().enumerate() {
            if entry.id != expected {
                let reason = if expected > 0 && manifest.entries[expected - 1].id == entry.id {
                    "duplicate id".to_string()
                } else {
                    format!("ids must be dense 0..n-1, missing id {expected}")
                };
                return Err(ingest_err(format!("{origin} (id {})", entry.id), reason));
            }
        }
        Ok(manifest)
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Manifest::parse(&text, &path.display().to_string())
    }

    /// Reads every payload. `base` resolves relative paths.
    pub fn into_pool(self, base: &Path, codec: CodecId) -> Result<Pool> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for entry in self.entries {
            let payload = match &entry.source {
                EntrySource::Path(p) => {
                    let full = if p.is_absolute() { p.clone() } else { base.join(p) };
                    fs::read(&full).map_err(|e| {
                        ingest_err(
                            format!("entry {}", entry.id),
                            format!("cannot read {}: {e}", full.display()),
                        )
                    })?
                }
                EntrySource::InlineHex(h) => hex::decode(h)
                    .map_err(|e| ingest_err(format!("entry {}", entry.id), format!("bad inline_hex: {e}")))?,
            };
            entries.push((payload, entry.label));
        }
        Ok(Pool::from_entries(entries, codec))
    }
}

/// Loads a pool from a manifest. The manifest's codec applies unless the
/// caller overrides it.
pub fn load_pool(path: &Path, codec: Option<CodecId>) -> Result<Pool> {
    let manifest = Manifest::read(path)?;
    let codec = codec.or_else(|| manifest.codec.clone()).unwrap_or_default();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    manifest.into_pool(base, codec)
}

/// Every regular file directly inside `dir`, ordered by byte-wise file
/// name, labelled with that name.
pub fn load_dir(dir: &Path, codec: CodecId) -> Result<Pool> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let ty = entry.file_type().map_err(|e| Error::io(entry.path(), e))?;
        if ty.is_file() {
            files.push(entry.path());
        } else if !ty.is_dir() {
            warn!("skipping {}: not a regular file", entry.path().display());
        }
    }
    files.sort_by_key(|p| p.file_name().map(os_bytes));
    let mut entries = Vec::with_capacity(files.len());
    for path in files {
        let payload = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let label = path.file_name().map(|n| n.to_string_lossy().into_owned());
        entries.push((payload, label));
    }
    Ok(Pool::from_entries(entries, codec))
}

fn os_bytes(name: &std::ffi::OsStr) -> Vec<u8> {
    name.as_encoded_bytes().to_vec()
}

/// Writes `pool` as a self-contained manifest with inline payloads.
pub fn write_manifest(pool: &Pool, path: &Path, metadata: BTreeMap<String, Value>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_manifest_to(pool, &mut out, metadata).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_manifest_to<W: Write>(pool: &Pool, out: &mut W, metadata: BTreeMap<String, Value>) -> std::io::Result<()> {
    let header = HeaderLine {
        codec: Some(pool.codec().clone()),
        metadata,
    };
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n")?;
    for case in pool.items() {
        let line = InlineLine {
            id: case.id,
            inline_hex: hex::encode(&case.payload),
            label: case.label.as_deref(),
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a manifest from any buffered reader.
pub fn read_manifest_from<R: BufRead>(reader: R, origin: &str) -> Result<Manifest> {
    let mut text = String::new();
    for line in reader.lines() {
        let line = line.map_err(|e| ingest_err(origin, e.to_string()))?;
        text.push_str(&line);
        text.push('\n');
    }
    Manifest::parse(&text, origin)
}
