//! CSV sample ingestion: one file per measure, rows are observations.

use std::path::Path;

use wasserstein_sgd::copula::{Copula, CopulaMeasure};
use wasserstein_sgd::quantile::QuantileGrid;

use crate::error::{CliError, CliResult, PhaseExt};
use crate::spec::{FamilyKind, Manifest, ManifestEntry, write_measure_json};

/// Parsed numeric columns of one CSV file.
pub struct SampleColumns {
    pub columns: Vec<Vec<f64>>,
    pub rows: usize,
}

/// Reads a CSV of observations. A single leading non-numeric row is treated
/// as a header. Rows must all have the same width; every field must parse
/// as a float.
pub fn read_samples(path: &Path) -> CliResult<SampleColumns> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            _ => CliError::validation(format!("{}: {e}", path.display())),
        })?;

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut rows = 0usize;
    let mut width: Option<usize> = None;
    for (row_index, record) in reader.records().enumerate() {
        let record = record.in_validation(&format!("{}", path.display()))?;
        if record.is_empty() || (record.len() == 1 && record[0].is_empty()) {
            continue;
        }
        let parsed: Result<Vec<f64>, usize> = record
            .iter()
            .enumerate()
            .map(|(col, field)| field.parse::<f64>().map_err(|_| col))
            .collect();
        match parsed {
            Ok(values) => {
                match width {
                    None => {
                        width = Some(values.len());
                        columns = values.iter().map(|v| vec![*v]).collect();
                    }
                    Some(w) if w == values.len() => {
                        for (col, v) in columns.iter_mut().zip(&values) {
                            col.push(*v);
                        }
                    }
                    Some(w) => {
                        return Err(CliError::validation(format!(
                            "{}: row {} has {} fields, expected {w}",
                            path.display(),
                            row_index + 1,
                            values.len()
                        )));
                    }
                }
                rows += 1;
            }
            Err(col) => {
                // A non-numeric first row is a header; anywhere else it is
                // a data error, reported with 1-based row/column.
                if row_index == 0 && width.is_none() {
                    continue;
                }
                return Err(CliError::validation(format!(
                    "{}: non-numeric field at row {}, column {}",
                    path.display(),
                    row_index + 1,
                    col + 1
                )));
            }
        }
    }
    if rows == 0 {
        return Err(CliError::validation(format!(
            "{}: no observations (empty file)",
            path.display()
        )));
    }
    Ok(SampleColumns {
        columns,
        rows,
    })
}

/// Ingestion report for one file.
pub struct IngestedFile {
    pub measure_path: std::path::PathBuf,
    pub rows: usize,
    pub dim: usize,
}

/// Ingests CSV files into measure files plus a manifest with uniform
/// weights. Univariate files must have one column; copula files may have
/// several, converted column-wise with the declared copula attached.
pub fn ingest(
    paths: &[std::path::PathBuf],
    family: FamilyKind,
    grid_size: usize,
    copula: Option<Copula>,
    out_dir: &Path,
) -> CliResult<Vec<IngestedFile>> {
    if paths.is_empty() {
        return Err(CliError::validation("no input files"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, &e))?;
    let weight = 1.0 / paths.len() as f64;
    let mut entries = Vec::new();
    let mut report = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        let samples = read_samples(path)?;
        let name = format!("m{i:03}.json");
        let target = out_dir.join(&name);
        let dim = samples.columns.len();
        match family {
            FamilyKind::Univariate => {
                if dim != 1 {
                    return Err(CliError::validation(format!(
                        "{}: univariate family expects 1 column, found {dim}",
                        path.display()
                    )));
                }
                let grid = QuantileGrid::from_samples(&samples.columns[0], grid_size)
                    .in_validation(&format!("{}", path.display()))?;
                write_measure_json(&target, &grid)?;
            }
            FamilyKind::Copula => {
                let copula = copula.clone().ok_or_else(|| {
                    CliError::validation("copula family ingestion needs a declared copula")
                })?;
                let marginals = samples
                    .columns
                    .iter()
                    .map(|col| QuantileGrid::from_samples(col, grid_size))
                    .collect::<Result<Vec<_>, _>>()
                    .in_validation(&format!("{}", path.display()))?;
                let measure = CopulaMeasure::new(copula, marginals)
                    .in_validation(&format!("{}", path.display()))?;
                write_measure_json(&target, &measure)?;
            }
            other => {
                return Err(CliError::validation(format!(
                    "CSV ingestion is not defined for the {} family",
                    other.as_str()
                )));
            }
        }
        entries.push(ManifestEntry {
            path: name.into(),
            weight,
        });
        report.push(IngestedFile {
            measure_path: target,
            rows: samples.rows,
            dim,
        });
    }
    Manifest {
        family,
        seed: 0,
        entries,
    }
    .save(&out_dir.join("manifest.json"))?;
    Ok(report)
}
