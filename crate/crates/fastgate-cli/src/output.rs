//! Columnar CSV output with a sidecar JSON record.

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::CliError;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::path::{Path, PathBuf};

/// Metadata record written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record<T> {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    /// Column names of the companion CSV file, if any.
    pub columns: Vec<String>,
    pub result: T,
}

impl<T> Record<T> {
    pub fn new(command: &str, config: &RunConfig, columns: &[&str], result: T) -> Self {
        Record {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config: config.clone(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            result,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn to_json<T: Serialize>(record: &T) -> String {
    let mut s = serde_json::to_string_pretty(record).expect("records serialise");
    s.push('\n');
    s
}

pub fn write_record<T: Serialize>(path: &Path, record: &T) -> Result<(), CliError> {
    std::fs::write(path, to_json(record)).map_err(|e| io_err(path, e))
}

/// Full-precision, locale-free decimal; empty for a missing value.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// CSV writer that flushes after every row, so an interrupted run leaves
/// a readable partial file.
pub struct CsvSink {
    writer: csv::Writer<File>,
    path: PathBuf,
    width: usize,
}

impl CsvSink {
    pub fn create(path: &Path, columns: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut sink = CsvSink {
            writer: csv::Writer::from_writer(file),
            path: path.to_path_buf(),
            width: columns.len(),
        };
        sink.row(columns.iter().map(|c| c.to_string()).collect())?;
        Ok(sink)
    }

    pub fn row(&mut self, fields: Vec<String>) -> Result<(), CliError> {
        debug_assert_eq!(fields.len(), self.width);
        self.writer.write_record(&fields).map_err(|e| io_err(&self.path, e))?;
        self.writer.flush().map_err(|e| io_err(&self.path, e))
    }
}
