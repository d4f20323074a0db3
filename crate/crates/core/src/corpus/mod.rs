//! Pools from disk, synthetic pools, and synthetic coverage oracles.

mod generate;
mod manifest;
mod sut;

use std::io::{Read, Write};
use std::path::Path;

use fixedbitset::FixedBitSet;

pub use generate::{generate_payloads, generate_pool, GeneratorSpec, Grammar, LengthDist, XML_TAGS};
pub use manifest::{
    load_dir, load_pool, read_manifest_from, write_manifest, write_manifest_to, EntrySource, Manifest, ManifestEntry,
};
pub use sut::{synth_coverage, FaultPredicate, SutSpec, SyntheticSut};

use crate::error::{Error, Result};
use crate::selection::{CoverageKind, CoverageMatrix};

/// CSV layout: header `id,<unit>...`, then one row per test id with 0/1 cells.
pub fn write_coverage_csv<W: Write>(matrix: &CoverageMatrix, out: W) -> Result<()> {
    let csv_err = |e: csv::Error| Error::CoverageCsv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(matrix.unit_names().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for id in 0..matrix.num_rows() {
        let row = matrix.row(id);
        let mut record = Vec::with_capacity(matrix.num_units() + 1);
        record.push(id.to_string());
        record.extend((0..matrix.num_units()).map(|u| if row[u] { "1" } else { "0" }.to_string()));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::CoverageCsv(e.to_string()))
}

pub fn read_coverage_csv<R: Read>(input: R, kind: CoverageKind) -> Result<CoverageMatrix> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = r.headers().map_err(|e| Error::CoverageCsv(e.to_string()))?.clone();
    if headers.get(0) != Some("id") {
        return Err(Error::CoverageCsv("first header column must be `id`".into()));
    }
    let unit_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (expected, record) in r.records().enumerate() {
        let record = record.map_err(|e| Error::CoverageCsv(e.to_string()))?;
        let line = expected + 2;
        let id: usize = record
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::CoverageCsv(format!("line {line}: bad id")))?;
        if id != expected {
            return Err(Error::CoverageCsv(format!(
                "line {line}: expected id {expected}, found {id}"
            )));
        }
        let mut row = FixedBitSet::with_capacity(unit_names.len());
        for (u, cell) in record.iter().skip(1).enumerate() {
            match cell.trim() {
                "0" => {}
                "1" => row.insert(u),
                other => return Err(Error::CoverageCsv(format!("line {line}: cell `{other}` is not 0 or 1"))),
            }
        }
        rows.push(row);
    }
    CoverageMatrix::new(unit_names, rows, kind)
}

pub fn read_coverage_file(path: &Path, kind: CoverageKind) -> Result<CoverageMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_coverage_csv(file, kind)
}
