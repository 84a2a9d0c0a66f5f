//! CSV datasets.
//!
//! A dataset file has a header row. `time` and `status` hold the outcome,
//! columns prefixed `x_` are penalized covariates and columns prefixed `z_`
//! feed the network. Other columns are ignored. Columns are located by name,
//! so their order does not matter.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use dplc_core::{Matrix, SurvivalDataset};

use crate::error::{AppError, AppResult};

/// Covariates and, when present, outcomes read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    pub x: Matrix,
    pub z: Matrix,
    pub times: Option<Vec<f64>>,
    pub status: Option<Vec<bool>>,
}

impl Table {
    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn into_dataset(self, path: &Path) -> AppResult<(SurvivalDataset, Vec<String>, Vec<String>)> {
        let times = self.times.ok_or_else(|| AppError::format(path, "missing required column `time`"))?;
        let status = self.status.ok_or_else(|| AppError::format(path, "missing required column `status`"))?;
        let ds = SurvivalDataset::new(times, status, self.x, self.z).map_err(|e| AppError::format(path, e.to_string()))?;
        Ok((ds, self.x_names, self.z_names))
    }
}

fn parse_cell(path: &Path, line: u64, column: &str, cell: &str) -> AppResult<f64> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
        return Err(AppError::format(path, format!("line {line}, column `{column}`: missing value")));
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| AppError::format(path, format!("line {line}, column `{column}`: cannot parse {cell:?} as a number")))?;
    if !v.is_finite() {
        return Err(AppError::format(path, format!("line {line}, column `{column}`: non-finite value")));
    }
    Ok(v)
}

/// Reads a table. With `require_outcome`, missing `time`/`status` columns
/// are an error; otherwise they are optional.
pub fn read_table(path: &Path, require_outcome: bool) -> AppResult<Table> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| AppError::format(path, e.to_string()))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let time_col = find("time");
    let status_col = find("status");
    if require_outcome {
        for (name, col) in [("time", time_col), ("status", status_col)] {
            if col.is_none() {
                return Err(AppError::format(path, format!("missing required column `{name}`")));
            }
        }
    }
    let x_cols: Vec<usize> = (0..headers.len()).filter(|&k| headers[k].starts_with("x_")).collect();
    let z_cols: Vec<usize> = (0..headers.len()).filter(|&k| headers[k].starts_with("z_")).collect();
    if x_cols.is_empty() {
        return Err(AppError::format(path, "no penalized covariates (columns prefixed `x_`)"));
    }
    let names = |cols: &[usize]| cols.iter().map(|&k| headers[k].to_string()).collect::<Vec<_>>();
    for group in [names(&x_cols), names(&z_cols)] {
        let mut sorted = group.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(AppError::format(path, format!("duplicate column `{}`", w[0])));
        }
    }

    let mut x = Vec::new();
    let mut z = Vec::new();
    let mut times = Vec::new();
    let mut status = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| AppError::format(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |k: usize| record.get(k).unwrap_or("");
        for &k in &x_cols {
            x.push(parse_cell(path, line, &headers[k], cell(k))?);
        }
        for &k in &z_cols {
            z.push(parse_cell(path, line, &headers[k], cell(k))?);
        }
        if let Some(k) = time_col {
            times.push(parse_cell(path, line, "time", cell(k))?);
        }
        if let Some(k) = status_col {
            status.push(match cell(k).trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(AppError::format(
                        path,
                        format!("line {line}, column `status`: expected 0 or 1, got {other:?}"),
                    ))
                }
            });
        }
    }
    let n = x.len() / x_cols.len();
    if n == 0 {
        return Err(AppError::format(path, "no data rows"));
    }
    let to_matrix = |data: Vec<f64>, cols: usize| Matrix::from_vec(n, cols, data).map_err(|e| AppError::format(path, e.to_string()));
    Ok(Table {
        x: to_matrix(x, x_cols.len())?,
        z: to_matrix(z, z_cols.len())?,
        x_names: names(&x_cols),
        z_names: names(&z_cols),
        times: time_col.map(|_| times),
        status: status_col.map(|_| status),
    })
}

/// Reads a dataset with outcomes and at least one `z_` column unless
/// `allow_no_z`.
pub fn read_dataset(path: &Path, allow_no_z: bool) -> AppResult<(SurvivalDataset, Vec<String>, Vec<String>)> {
    let table = read_table(path, true)?;
    if table.z_names.is_empty() && !allow_no_z {
        return Err(AppError::format(path, "no network covariates (columns prefixed `z_`)"));
    }
    table.into_dataset(path)
}

pub fn write_dataset(path: &Path, ds: &SurvivalDataset, x_names: &[String], z_names: &[String]) -> AppResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| AppError::format(path, e.to_string()))?;
    let mut header = vec!["time".to_string(), "status".to_string()];
    header.extend(x_names.iter().cloned());
    header.extend(z_names.iter().cloned());
    let err = |e: csv::Error| AppError::format(path, e.to_string());
    w.write_record(&header).map_err(err)?;
    for i in 0..ds.len() {
        let mut row = vec![ds.times()[i].to_string(), (ds.status()[i] as u8).to_string()];
        row.extend(ds.x().row(i).iter().map(f64::to_string));
        row.extend(ds.z().row(i).iter().map(f64::to_string));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn default_names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}{j}")).collect()
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::format(path, e.to_string()))?;
    text.push('\n');
    let mut f = File::create(path).map_err(|e| AppError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| AppError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> AppResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| AppError::format(path, format!("line {}, column {}: {}", e.line(), e.column(), e)))
}
