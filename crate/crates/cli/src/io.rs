use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// A numeric CSV table with a header row.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: usize,
    /// Column-major values.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let bad = |message: String| CliError::Input { path: path.to_path_buf(), message };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(source) => CliError::Read { path: path.to_path_buf(), source },
                other => bad(format!("{other:?}")),
            })?;
        let headers: Vec<String> =
            reader.headers().map_err(|e| bad(e.to_string()))?.iter().map(|h| h.trim().to_string()).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(bad("missing header row".into()));
        }
        let mut columns = vec![Vec::new(); headers.len()];
        let mut rows = 0;
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            let line = i + 2;
            for (j, field) in record.iter().enumerate() {
                let field = field.trim();
                if field.is_empty() {
                    return Err(bad(format!("line {line}: missing value in column {}", headers[j])));
                }
                let v: f64 = field
                    .parse()
                    .map_err(|_| bad(format!("line {line}: {field:?} in column {} is not a number", headers[j])))?;
                columns[j].push(v);
            }
            rows += 1;
        }
        Ok(Table { headers, rows, columns })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Design matrix and names of all columns except `skip`.
    pub fn design(&self, skip: Option<usize>) -> (Array2<f64>, Vec<String>) {
        let keep: Vec<usize> = (0..self.headers.len()).filter(|&j| Some(j) != skip).collect();
        let x = Array2::from_shape_fn((self.rows, keep.len()), |(i, k)| self.columns[keep[k]][i]);
        (x, keep.iter().map(|&j| self.headers[j].clone()).collect())
    }

    pub fn column(&self, j: usize) -> Array1<f64> {
        Array1::from(self.columns[j].clone())
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

/// Writes `text` to `path`, or to standard output when `path` is `None`.
pub fn emit(path: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Write { path: p.clone(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(seqreject::Error::from)?;
    s.push('\n');
    Ok(s)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let fail = |e: csv::Error| CliError::Write { path: path.to_path_buf(), source: e.into() };
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for row in rows {
        w.serialize(row).map_err(fail)?;
    }
    w.flush().map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}
