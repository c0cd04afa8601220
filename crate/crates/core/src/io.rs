//! CSV import and export.
//!
//! Numbers are written in scientific notation with 17 significant digits,
//! enough for `f64` values to round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::DataMatrix;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: u64, message: String },
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }
}

/// 17-significant-digit text for an `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render a matrix as CSV, one matrix row per line.
pub fn matrix_to_csv(values: &DMatrix<f64>, header: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for row in values.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|e| IoError::io(path, e))
}

/// Write a data matrix sample-major: one row per sample, one column per
/// feature.
pub fn write_samples_csv(path: &Path, x: &DMatrix<f64>, header: bool) -> Result<(), IoError> {
    let names: Vec<String> = (0..x.nrows()).map(|i| format!("x{i}")).collect();
    write_text(path, &matrix_to_csv(&x.transpose(), header.then_some(names.as_slice())))
}

/// Write a boolean mask as one `0`/`1` per line.
pub fn write_mask_csv(path: &Path, mask: &[bool]) -> Result<(), IoError> {
    let mut out = String::with_capacity(mask.len() * 2);
    for &b in mask {
        let _ = writeln!(out, "{}", u8::from(b));
    }
    write_text(path, &out)
}

/// Read a numeric CSV into a row-major matrix.
pub fn read_csv_matrix(path: &Path, has_header: bool) -> Result<DMatrix<f64>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_csv_matrix(&text, has_header).map_err(|(line, message)| IoError::Malformed { path: path.to_path_buf(), line, message })
}

fn parse_csv_matrix(text: &str, has_header: bool) -> Result<DMatrix<f64>, (u64, String)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            (line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err((line, format!("column {}: non-finite value {field:?}", c + 1))),
                Err(_) => Err((line, format!("column {}: cannot parse {field:?} as a number", c + 1))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let Some(first) = rows.first() else {
        return Err((1, "no data rows".into()));
    };
    let cols = first.len();
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Read sample-major CSV and transpose into a columns-are-samples matrix.
pub fn read_samples_csv(path: &Path, has_header: bool) -> Result<DataMatrix, IoError> {
    let rows = read_csv_matrix(path, has_header)?;
    DataMatrix::new(rows.transpose()).map_err(|e| IoError::Malformed { path: path.to_path_buf(), line: 1, message: e.to_string() })
}
