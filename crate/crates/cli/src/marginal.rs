//! Marginal design matrices as headerless comma-separated rows.

use std::path::Path;

use glam_core::MarginalMatrix;

use crate::error::{CliError, Result};

pub fn read_marginal(path: &Path) -> Result<MarginalMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| CliError::Csv { path: path.into(), source })?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|source| CliError::Csv { path: path.into(), source })?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| CliError::format(path, format!("row {}: '{field}' is not a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::format(path, "empty matrix"));
    }
    MarginalMatrix::from_rows(&rows).map_err(|e| CliError::format(path, e.to_string()))
}

/// Shortest round-tripping decimal for every entry.
pub fn write_marginal(path: &Path, matrix: &MarginalMatrix) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|source| CliError::Csv { path: path.into(), source })?;
    for row in matrix.as_array().rows() {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(|source| CliError::Csv { path: path.into(), source })?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}
