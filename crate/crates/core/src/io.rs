//! Files written by a run: raw field dumps, the CSV trace, JSON manifests
//! and checkpoints.
//!
//! A field dump is one line of JSON (the [`FieldHeader`]) followed by the
//! values as little-endian `f64`, in storage order.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, StencilOrder};

pub const FIELD_FORMAT: &str = "gauduchon-field";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format: String,
    pub version: u32,
    pub name: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub points: usize,
    pub period: f64,
    pub stencil_order: StencilOrder,
    pub len: usize,
}

pub fn write_scalar_field(path: &Path, name: &str, field: &ScalarField) -> Result<()> {
    let g = field.grid;
    let header = FieldHeader {
        format: FIELD_FORMAT.into(),
        version: 1,
        name: name.into(),
        n: g.n(),
        points: g.points_per_axis(),
        period: g.period(),
        stencil_order: g.order(),
        len: field.values.len(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scalar_field(path: &Path) -> Result<(FieldHeader, ScalarField)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: FieldHeader = serde_json::from_str(line.trim_end())?;
    if header.format != FIELD_FORMAT {
        return Err(Error::Dump(format!("unknown format {:?}", header.format)));
    }
    let grid = Grid::new(header.n, header.points, header.period)
        .map_err(|e| Error::Dump(e.to_string()))?
        .with_order(header.stencil_order);
    if header.len != grid.len() {
        return Err(Error::Dump(format!(
            "header length {} does not match grid size {}",
            header.len,
            grid.len()
        )));
    }
    let mut bytes = Vec::with_capacity(header.len * 8);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != header.len * 8 {
        return Err(Error::Dump(format!(
            "expected {} bytes of data, found {}",
            header.len * 8,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, ScalarField { grid, values }))
}

/// Appends [`DiagnosticsRecord`] rows to `trace.csv`, flushing after each.
pub struct TraceWriter {
    inner: csv::Writer<File>,
}

impl TraceWriter {
    /// New file with the header row.
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(File::create(path)?);
        inner.write_record(DiagnosticsRecord::COLUMNS).map_err(csv_error)?;
        inner.flush()?;
        Ok(TraceWriter { inner })
    }

    /// Existing file truncated to its header and first `rows` data rows.
    pub fn reopen(path: &Path, rows: usize) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let keep: usize = text.split_inclusive('\n').take(rows + 1).map(str::len).sum();
        let file = OpenOptions::new().write(true).open(path)?;
        file.set_len(keep as u64)?;
        let mut file = OpenOptions::new().append(true).open(path)?;
        file.flush()?;
        Ok(TraceWriter {
            inner: csv::WriterBuilder::new().has_headers(false).from_writer(file),
        })
    }

    pub fn write(&mut self, row: &DiagnosticsRecord) -> Result<()> {
        let fields: Vec<String> = row.values().iter().map(|v| v.to_string()).collect();
        self.inner.write_record(&fields).map_err(csv_error)?;
        self.inner.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Rows of a trace file.
pub fn read_trace(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let headers = r.headers().map_err(csv_error)?.clone();
    if headers.iter().ne(DiagnosticsRecord::COLUMNS) {
        return Err(Error::Dump(format!("unexpected trace columns {headers:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

/// Pretty JSON written to a temporary file and renamed into place.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Hex SHA-256 of the given byte strings, each length-prefixed.
pub fn sha256_hex<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}
