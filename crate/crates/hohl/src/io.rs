//! Dataset ingestion and result persistence.
//!
//! Datasets are CSV files with header `f0,...,f{d-1}[,label]`; results are
//! written as CSV (17 significant digits, so records round-trip exactly) or
//! as a JSON array with the same field names.

use crate::error::{Error, Result};
use crate::geometry::{Domain, PointCloud};
use crate::harness::TrialResult;
use std::fs;
use std::path::Path;

fn parse_error(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Loads a point cloud from CSV. The header names d feature columns
/// `f0..f{d-1}` and optionally a trailing `label` column of nonnegative
/// integers; every row must match it. Parse errors carry 1-based line
/// numbers. Row order is preserved.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {}", path.display(), e)))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(1, "empty file"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let has_label = columns.last() == Some(&"label");
    let d = columns.len() - usize::from(has_label);
    if d == 0 {
        return Err(parse_error(1, "no feature columns in header"));
    }
    for (i, name) in columns[..d].iter().enumerate() {
        if *name != format!("f{}", i) {
            return Err(parse_error(
                1,
                format!("expected column 'f{}', found '{}'", i, name),
            ));
        }
    }

    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(parse_error(
                lineno,
                format!("{} cells, header has {}", cells.len(), columns.len()),
            ));
        }
        for cell in &cells[..d] {
            let value: f64 = cell
                .parse()
                .map_err(|_| parse_error(lineno, format!("invalid real '{}'", cell)))?;
            points.push(value);
        }
        if has_label {
            let label: usize = cells[d].parse().map_err(|_| {
                parse_error(lineno, format!("invalid label '{}'", cells[d]))
            })?;
            labels.push(label);
        }
    }
    PointCloud::new(points, d, has_label.then_some(labels), Domain::Cube)
}

/// Persistence format for result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Csv,
    Json,
}

const RESULT_HEADER: &str =
    "experiment,dataset,rate,method,q,j,mean_acc,std_acc,trials,master_seed,seconds";

fn float17(v: f64) -> String {
    format!("{:.16e}", v)
}

fn check_field(value: &str) -> Result<()> {
    if value.contains(',') || value.contains('\n') {
        return Err(Error::invalid(format!(
            "field '{}' would break the CSV layout",
            value
        )));
    }
    Ok(())
}

/// Renders result rows to CSV with the fixed column order.
pub fn results_to_csv(results: &[TrialResult]) -> Result<String> {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for r in results {
        check_field(&r.experiment)?;
        check_field(&r.dataset)?;
        check_field(&r.rate)?;
        check_field(&r.method)?;
        let j = r.j.map(|j| j.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.dataset,
            r.rate,
            r.method,
            r.q,
            j,
            float17(r.mean_acc),
            float17(r.std_acc),
            r.trials,
            r.master_seed,
            float17(r.seconds),
        ));
    }
    Ok(out)
}

/// Parses a result CSV produced by [`results_to_csv`].
pub fn parse_results_csv(text: &str) -> Result<Vec<TrialResult>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(1, "empty result file"))?;
    if header != RESULT_HEADER {
        return Err(parse_error(1, "unexpected result header"));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 11 {
            return Err(parse_error(lineno, "expected 11 cells"));
        }
        let parse_f64 = |cell: &str| -> Result<f64> {
            cell.parse()
                .map_err(|_| parse_error(lineno, format!("invalid real '{}'", cell)))
        };
        let parse_usize = |cell: &str| -> Result<usize> {
            cell.parse()
                .map_err(|_| parse_error(lineno, format!("invalid count '{}'", cell)))
        };
        rows.push(TrialResult {
            experiment: cells[0].to_string(),
            dataset: cells[1].to_string(),
            rate: cells[2].to_string(),
            method: cells[3].to_string(),
            q: parse_usize(cells[4])?,
            j: if cells[5].is_empty() {
                None
            } else {
                Some(parse_usize(cells[5])?)
            },
            mean_acc: parse_f64(cells[6])?,
            std_acc: parse_f64(cells[7])?,
            trials: parse_usize(cells[8])?,
            master_seed: cells[9]
                .parse()
                .map_err(|_| parse_error(lineno, format!("invalid seed '{}'", cells[9])))?,
            seconds: parse_f64(cells[10])?,
        });
    }
    Ok(rows)
}

/// Writes result rows to a file in the chosen format.
pub fn write_results(
    path: impl AsRef<Path>,
    results: &[TrialResult],
    format: ResultFormat,
) -> Result<()> {
    let text = match format {
        ResultFormat::Csv => results_to_csv(results)?,
        ResultFormat::Json => {
            let mut s = serde_json::to_string_pretty(results)?;
            s.push('\n');
            s
        }
    };
    fs::write(path.as_ref(), text)?;
    Ok(())
}

/// Writes per-point predictions as `index,label` rows.
pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let mut out = String::from("index,label\n");
    for (i, label) in labels.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i, label));
    }
    fs::write(path.as_ref(), out)?;
    Ok(())
}

/// Renders consistency rows to CSV.
pub fn consistency_rows_to_csv(rows: &[crate::consistency::ConsistencyRow]) -> String {
    let mut out = String::from("n,eps,k,p,median_err,p90_err,seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            float17(r.eps),
            r.k,
            r.p,
            float17(r.median_err),
            float17(r.p90_err),
            float17(r.seconds),
        ));
    }
    out
}

/// Writes consistency rows to a CSV file.
pub fn write_consistency_rows(
    path: impl AsRef<Path>,
    rows: &[crate::consistency::ConsistencyRow],
) -> Result<()> {
    fs::write(path.as_ref(), consistency_rows_to_csv(rows))?;
    Ok(())
}
