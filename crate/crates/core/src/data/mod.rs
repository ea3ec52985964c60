//! Domain types and CSV ingest.
//!
//! Every file format is UTF-8 CSV with a fixed header row; LF and CRLF line
//! endings are both accepted. Parsed structures are canonical: row order in
//! the input never affects the value that comes out, and every type can be
//! written back to the same CSV schema it was read from.

mod amenity;
mod census;
mod events;
mod openings;
mod taxonomy;
mod weights;
mod wide;

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use amenity::{parse_amenity_panel, AmenityObservation, AmenityPanel};
pub use census::{parse_census, CensusTable};
pub use events::{format_timestamp, parse_events, parse_timestamp, ReviewEvent, ReviewEventLog};
pub use openings::{parse_openings, Opening, OpeningLog};
pub use taxonomy::{parse_taxonomy, Taxonomy, YELP_MAX_DEPTH};
pub use weights::{parse_weights, DimensionWeightTable, CORE_DIMENSIONS, MAX_DIMENSIONS};
pub use wide::{parse_wide_panel, WidePanel, WideRow};

/// Errors raised while reading or validating input data.
///
/// Row-level variants carry the 1-based line number of the offending row
/// (the header is line 1).
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: missing column `{column}`")]
    MissingColumn { column: String, line: usize },
    #[error("line {line}: duplicate key {key}")]
    DuplicateKey { key: String, line: usize },
    #[error("line {line}: negative count {value}")]
    NegativeCount { value: i64, line: usize },
    #[error("line {line}: unparseable row: {reason}")]
    UnparseableRow { line: usize, reason: String },
    #[error("line {line}: cycle in taxonomy through `{node}`")]
    CycleDetected { node: String, line: usize },
    #[error("line {line}: unknown parent `{parent}`")]
    UnknownParent { parent: String, line: usize },
    #[error("line {line}: category `{node}` has depth {depth}, limit is {limit}")]
    DepthExceeded {
        node: String,
        depth: u32,
        limit: u32,
        line: usize,
    },
    #[error("line {line}: unknown category `{category}`")]
    UnknownCategory { category: String, line: usize },
    #[error("line {line}: bad timestamp `{value}`")]
    BadTimestamp { value: String, line: usize },
    #[error("line {line}: empty category list")]
    EmptyCategories { line: usize },
    #[error("line {line}: duplicate location `{location}`")]
    DuplicateLocation { location: String, line: usize },
    #[error("line {line}: bad date `{value}`")]
    BadDate { value: String, line: usize },
    #[error("line {line}: weight {value} outside [1, 5]")]
    WeightOutOfRange { value: f64, line: usize },
    #[error("line {line}: {count} dimensions, at most {MAX_DIMENSIONS} allowed")]
    TooManyDimensions { count: usize, line: usize },
}

impl DataError {
    /// Line number of the offending row, when the error is row-level.
    pub fn line(&self) -> Option<usize> {
        use DataError::*;
        match self {
            Io { .. } => None,
            MissingColumn { line, .. }
            | DuplicateKey { line, .. }
            | NegativeCount { line, .. }
            | UnparseableRow { line, .. }
            | CycleDetected { line, .. }
            | UnknownParent { line, .. }
            | DepthExceeded { line, .. }
            | UnknownCategory { line, .. }
            | BadTimestamp { line, .. }
            | EmptyCategories { line, .. }
            | DuplicateLocation { line, .. }
            | BadDate { line, .. }
            | WeightOutOfRange { line, .. }
            | TooManyDimensions { line, .. } => Some(*line),
        }
    }
}

pub(crate) fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A CSV reader plus the column positions of the required header fields.
pub(crate) struct Table<R: Read> {
    reader: csv::Reader<R>,
    columns: Vec<usize>,
}

/// One data row with its line number.
pub(crate) struct Row {
    pub line: usize,
    pub fields: Vec<String>,
}

impl<R: Read> Table<R> {
    pub fn new(source: R, required: &[&str]) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(source);
        let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
        let mut columns = Vec::with_capacity(required.len());
        for name in required {
            let pos = headers
                .iter()
                .position(|h| h.trim_start_matches('\u{feff}') == *name)
                .ok_or_else(|| DataError::MissingColumn {
                    column: name.to_string(),
                    line: 1,
                })?;
            columns.push(pos);
        }
        Ok(Table { reader, columns })
    }

    /// Header fields beyond the required ones, with their positions.
    pub fn extra_columns(&mut self) -> Result<Vec<(usize, String)>, DataError> {
        let headers = self.reader.headers().map_err(|e| csv_error(e, 1))?;
        Ok(headers
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.columns.contains(i))
            .map(|(i, h)| (i, h.to_string()))
            .collect())
    }

    /// Reads all rows, selecting `required` columns followed by `extra` positions.
    pub fn rows_with(mut self, extra: &[usize]) -> Result<Vec<Row>, DataError> {
        let mut out = Vec::new();
        let mut record = csv::StringRecord::new();
        loop {
            let more = self
                .reader
                .read_record(&mut record)
                .map_err(|e| csv_error(e, 0))?;
            if !more {
                break;
            }
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            let fields = self
                .columns
                .iter()
                .chain(extra)
                .map(|&i| record.get(i).unwrap_or("").to_string())
                .collect();
            out.push(Row { line, fields });
        }
        Ok(out)
    }

    pub fn rows(self) -> Result<Vec<Row>, DataError> {
        self.rows_with(&[])
    }
}

fn csv_error(e: csv::Error, fallback_line: usize) -> DataError {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_line);
    DataError::UnparseableRow {
        line,
        reason: e.to_string(),
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    value: &str,
    what: &str,
    line: usize,
) -> Result<T, DataError> {
    value.parse().map_err(|_| DataError::UnparseableRow {
        line,
        reason: format!("bad {what} `{value}`"),
    })
}

pub(crate) fn parse_real(value: &str, what: &str, line: usize) -> Result<f64, DataError> {
    let v: f64 = parse_field(value, what, line)?;
    if !v.is_finite() {
        return Err(DataError::UnparseableRow {
            line,
            reason: format!("non-finite {what} `{value}`"),
        });
    }
    Ok(v)
}

pub(crate) fn require_nonempty(value: &str, what: &str, line: usize) -> Result<(), DataError> {
    if value.is_empty() {
        return Err(DataError::UnparseableRow {
            line,
            reason: format!("empty {what}"),
        });
    }
    Ok(())
}

/// CSV writer into an in-memory string. Floats use Rust's shortest
/// round-trip formatting, so written values re-parse to the same bits.
pub(crate) struct CsvOut {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        CsvOut { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn finish(self) -> String {
        let bytes = self.writer.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("utf-8 fields")
    }
}
