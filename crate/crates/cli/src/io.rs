//! File formats: datasets and labels as CSV, everything else as versioned JSON.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sonclust_core::{Dataset, Points};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

fn usage(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {msg}", path.display()))
}

/// Numeric CSV, one point per row, `d` columns, optional header line.
pub fn read_dataset(path: &Path, header: bool) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| usage(path, e))?;
    let mut data = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| usage(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let d = *dim.get_or_insert(record.len());
        if record.len() != d {
            return Err(usage(
                path,
                format!("line {line}: expected {d} columns, found {}", record.len()),
            ));
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                usage(
                    path,
                    format!("line {line}, column {}: `{field}` is not a number", col + 1),
                )
            })?;
            if !value.is_finite() {
                return Err(usage(
                    path,
                    format!("line {line}, column {}: non-finite value", col + 1),
                ));
            }
            data.push(value);
        }
        rows += 1;
    }
    let d = dim.ok_or_else(|| usage(path, "no data rows"))?;
    let points = Points::new(rows, d, data).map_err(|e| usage(path, e))?;
    Dataset::new(points).map_err(|e| usage(path, e))
}

pub fn write_points(path: &Path, points: &Points) -> CliResult<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| usage(path, e))?;
    for row in points.rows() {
        writer
            .write_record(row.iter().map(f64::to_string))
            .map_err(|e| usage(path, e))?;
    }
    writer.flush().map_err(|e| usage(path, e))
}

pub fn write_labels(path: &Path, labels: &[usize]) -> CliResult<()> {
    let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(path, text).map_err(|e| usage(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| usage(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        usage(
            path,
            format!("line {}, column {}: {e}", e.line(), e.column()),
        )
    })
}

/// Pretty JSON to `path`, or stdout when absent.
pub fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    match path {
        Some(path) => fs::write(path, text + "\n").map_err(|e| usage(path, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
