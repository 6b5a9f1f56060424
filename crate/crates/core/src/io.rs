//! CSV input and output for matrices, data tables and dated price tables.
//!
//! Row and column numbers in [`Error::Input`] are 1-based positions in the
//! file, header line included.

use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::matcore::{Matrix, SymMatrix};

/// Observations as rows, with column names.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub headers: Vec<String>,
    pub data: Matrix<f64>,
}

/// Prices indexed by date, one asset per column.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub dates: Vec<NaiveDate>,
    pub headers: Vec<String>,
    pub prices: Matrix<f64>,
}

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .trim(csv::Trim::All)
        .from_path(path)?)
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    let value: f64 = cell.parse().map_err(|_| Error::Input {
        row,
        col,
        message: format!("not a number: {cell:?}"),
    })?;
    if !value.is_finite() {
        return Err(Error::Input {
            row,
            col,
            message: format!("non-finite value: {cell:?}"),
        });
    }
    Ok(value)
}

fn check_width(len: usize, width: usize, row: usize) -> Result<()> {
    if len != width {
        return Err(Error::Input {
            row,
            col: len.min(width) + 1,
            message: format!("expected {width} fields, found {len}"),
        });
    }
    Ok(())
}

/// Reads a numeric table whose first line holds column names.
pub fn read_data_csv(path: &Path) -> Result<DataTable> {
    let mut rdr = reader(path, true)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let width = headers.len();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        check_width(rec.len(), width, line)?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(cell, line, c + 1))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input {
            row: 2,
            col: 1,
            message: "no data rows".into(),
        });
    }
    Ok(DataTable {
        headers,
        data: Matrix::from_rows(&rows)?,
    })
}

/// Reads prices: first column an ISO-8601 date, the rest numeric.
pub fn read_price_csv(path: &Path) -> Result<PriceTable> {
    let mut rdr = reader(path, true)?;
    let all: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if all.len() < 2 {
        return Err(Error::Input {
            row: 1,
            col: all.len() + 1,
            message: "price table needs a date column and at least one asset".into(),
        });
    }
    let width = all.len();
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        check_width(rec.len(), width, line)?;
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|_| Error::Input {
            row: line,
            col: 1,
            message: format!("not an ISO-8601 date: {:?}", &rec[0]),
        })?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(Error::Input {
                    row: line,
                    col: 1,
                    message: "dates must be strictly increasing".into(),
                });
            }
        }
        let row = rec
            .iter()
            .enumerate()
            .skip(1)
            .map(|(c, cell)| parse_cell(cell, line, c + 1))
            .collect::<Result<Vec<f64>>>()?;
        dates.push(date);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input {
            row: 2,
            col: 1,
            message: "no data rows".into(),
        });
    }
    Ok(PriceTable {
        dates,
        headers: all[1..].to_vec(),
        prices: Matrix::from_rows(&rows)?,
    })
}

/// Reads a square symmetric matrix. A first line that does not parse as
/// numbers is taken as a header.
pub fn read_matrix_csv(path: &Path) -> Result<SymMatrix<f64>> {
    let mut rdr = reader(path, false)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 1;
        let parsed: Result<Vec<f64>> = rec.iter().enumerate().map(|(c, cell)| parse_cell(cell, line, c + 1)).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    let p = rows.len();
    if p == 0 {
        return Err(Error::Input {
            row: 1,
            col: 1,
            message: "empty matrix".into(),
        });
    }
    for (k, row) in rows.iter().enumerate() {
        check_width(row.len(), p, k + 1)?;
    }
    for i in 0..p {
        for j in (i + 1)..p {
            if (rows[i][j] - rows[j][i]).abs() > 1e-8 {
                return Err(Error::Input {
                    row: i + 1,
                    col: j + 1,
                    message: format!("matrix is not symmetric: {} vs {}", rows[i][j], rows[j][i]),
                });
            }
        }
    }
    SymMatrix::from_rows(&rows, 1e-8)
}

/// Writes a matrix, optionally preceded by a header line.
pub fn write_matrix_csv(path: &Path, m: &SymMatrix<f64>, headers: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if let Some(h) = headers {
        w.write_record(h)?;
    }
    for i in 0..m.dim() {
        w.write_record(m.row(i).iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
