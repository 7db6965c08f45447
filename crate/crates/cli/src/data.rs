//! CSV ingestion and float formatting.

use std::path::Path;

use nervereg::covering::{Dataset, Response};

use crate::config::{DataSpec, Task};
use crate::error::{io_err, CliError, CliResult};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let header: Vec<String> = rdr.headers().map_err(|e| io_err(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok(Table { header, rows })
}

pub struct LoadedData {
    pub dataset: Dataset,
    pub feature_names: Vec<String>,
    pub response_names: Vec<String>,
    /// Response columns as numbers (regression) or labels (classification).
    pub numeric_response: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

fn column(header: &[String], name: &str) -> CliResult<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Input(format!("column `{name}` not found")))
}

fn parse(s: &str, row: usize, col: &str) -> CliResult<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| CliError::Input(format!("row {row}, column `{col}`: `{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::Input(format!("row {row}, column `{col}`: non-finite value")));
    }
    Ok(v)
}

pub fn load_dataset(path: &Path, spec: &DataSpec, task: Task) -> CliResult<LoadedData> {
    let table = read_table(path)?;
    if table.rows.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    let h = &table.header;
    let id_col = h.iter().position(|c| *c == spec.id_column);
    let response_idx: Vec<usize> = spec.response_columns.iter().map(|c| column(h, c)).collect::<CliResult<_>>()?;
    let feature_names: Vec<String> = match &spec.feature_columns {
        Some(cols) => cols.clone(),
        None => h
            .iter()
            .enumerate()
            .filter(|(i, c)| c.starts_with(&spec.feature_prefix) && Some(*i) != id_col && !response_idx.contains(i))
            .map(|(_, c)| c.clone())
            .collect(),
    };
    if feature_names.is_empty() {
        return Err(CliError::Input("no feature columns selected".into()));
    }
    let feature_idx: Vec<usize> = feature_names.iter().map(|c| column(h, c)).collect::<CliResult<_>>()?;

    let mut points = Vec::with_capacity(table.rows.len());
    let mut ids = Vec::with_capacity(table.rows.len());
    for (r, row) in table.rows.iter().enumerate() {
        points.push(
            feature_idx
                .iter()
                .map(|&c| parse(&row[c], r + 1, &h[c]))
                .collect::<CliResult<Vec<f64>>>()?,
        );
        ids.push(id_col.map_or_else(|| r.to_string(), |c| row[c].clone()));
    }
    let (numeric_response, labels, response) = match task {
        Task::Regression => {
            let cols: Vec<Vec<f64>> = response_idx
                .iter()
                .map(|&c| {
                    table
                        .rows
                        .iter()
                        .enumerate()
                        .map(|(r, row)| parse(&row[c], r + 1, &h[c]))
                        .collect::<CliResult<Vec<f64>>>()
                })
                .collect::<CliResult<_>>()?;
            let response = if cols.len() == 1 {
                Response::Scalar(cols[0].clone())
            } else {
                Response::Multi(cols.clone())
            };
            (cols, Vec::new(), response)
        }
        Task::Classification => {
            let labels: Vec<String> = table.rows.iter().map(|row| row[response_idx[0]].clone()).collect();
            (Vec::new(), labels.clone(), Response::Labels(labels))
        }
    };
    let dataset = Dataset::with_ids(points, Some(response), ids)?;
    Ok(LoadedData {
        dataset,
        feature_names,
        response_names: spec.response_columns.clone(),
        numeric_response,
        labels,
    })
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}
