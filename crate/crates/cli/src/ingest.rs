use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use distglm::{Dataset, Error};
use nalgebra::{DMatrix, DVector};

use crate::error::CliError;

/// Numeric rows of a comma-separated file. Row and column numbers in errors
/// are 1-based and count data rows only.
pub fn read_rows(path: &Path, header: bool) -> Result<Vec<Vec<f64>>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>().map_err(|_| CliError::Parse {
                    path: path.to_path_buf(),
                    row: i + 1,
                    column: j + 1,
                    value: cell.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_matrix(path: &Path, header: bool) -> Result<DMatrix<f64>, CliError> {
    let rows = read_rows(path, header)?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

pub fn read_vector(path: &Path, header: bool) -> Result<DVector<f64>, CliError> {
    let rows = read_rows(path, header)?;
    if let Some(i) = rows.iter().position(|r| r.len() != 1) {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: format!("row {} has {} columns, expected 1", i + 1, rows[i].len()),
        });
    }
    Ok(DVector::from_iterator(rows.len(), rows.into_iter().map(|r| r[0])))
}

/// Design and response files into a dataset. Family-specific response
/// checks happen at fit time.
pub fn ingest_csv(path_x: &Path, path_y: &Path, header: bool) -> Result<Dataset, CliError> {
    let x = read_matrix(path_x, header)?;
    let y = read_vector(path_y, header)?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "response rows vs design rows",
            expected: x.nrows(),
            actual: y.len(),
        }
        .into());
    }
    Ok(Dataset::new(x, y)?)
}

/// Writes rows with shortest round-trip formatting, so reading back is exact.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<(), CliError> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}
