use std::path::Path;

use addsel::Dataset;
use nalgebra::{DMatrix, DVector};

use crate::error::CliError;

/// A dataset read from CSV and the covariate columns left out of it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    /// Constant covariate columns, dropped before fitting.
    pub excluded: Vec<String>,
}

/// Reads a CSV file with a header row. `response` names the response column;
/// every other column is a covariate. Data rows are numbered from 1.
pub fn load_csv(path: &Path, response: &str) -> Result<Loaded, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let ycol = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| CliError::MissingColumn(response.to_string()))?;

    let width = headers.len();
    let mut cells: Vec<f64> = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::Csv(format!("row {row}: {e}")))?;
        if record.len() != width {
            return Err(CliError::Csv(format!(
                "row {row}: expected {width} fields, found {}",
                record.len()
            )));
        }
        for (c, field) in record.iter().enumerate() {
            let column = headers[c].clone();
            if field.is_empty()
                || field.eq_ignore_ascii_case("na")
                || field.eq_ignore_ascii_case("nan")
            {
                return Err(CliError::MissingValue { row, column });
            }
            let v: f64 = field.parse().map_err(|_| CliError::NonNumeric {
                row,
                column: column.clone(),
                value: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(CliError::NonNumeric {
                    row,
                    column,
                    value: field.to_string(),
                });
            }
            cells.push(v);
        }
        rows += 1;
    }
    if rows < 2 {
        return Err(CliError::Csv(format!(
            "need at least two data rows, found {rows}"
        )));
    }

    let at = |r: usize, c: usize| cells[r * width + c];
    let mut names = Vec::new();
    let mut excluded = Vec::new();
    let mut keep = Vec::new();
    for c in (0..width).filter(|&c| c != ycol) {
        let first = at(0, c);
        if (1..rows).all(|r| at(r, c) == first) {
            excluded.push(headers[c].clone());
        } else {
            keep.push(c);
            names.push(headers[c].clone());
        }
    }
    if keep.is_empty() {
        return Err(CliError::Csv("no non-constant covariate columns".into()));
    }
    let y = DVector::from_fn(rows, |r, _| at(r, ycol));
    let x = DMatrix::from_fn(rows, keep.len(), |r, j| at(r, keep[j]));
    Ok(Loaded {
        dataset: Dataset::new(y, x, Some(names))?,
        excluded,
    })
}

/// Writes `data` as CSV with the response first under `response`.
pub fn write_csv(path: &Path, data: &Dataset, response: &str) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut header = vec![response.to_string()];
    header.extend((0..data.p()).map(|j| data.name(j)));
    w.write_record(&header)
        .map_err(|e| CliError::Csv(e.to_string()))?;
    for i in 0..data.n() {
        let mut row = vec![data.y[i].to_string()];
        row.extend(data.x.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)
            .map_err(|e| CliError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}
