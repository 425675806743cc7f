//! CSV and JSON input-output.
//!
//! Numbers are written with Rust's `Display` for `f64`, which is the
//! shortest decimal that round-trips and never depends on the locale.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use kfold_stability::risk::RiskSummary;
use kfold_stability::selection::CurveRow;
use kfold_stability::{Dataset, Ordering};
use serde::Serialize;

use crate::error::{CliError, Result};

/// Reads a dataset with a header row holding a `y` column; every other
/// column is a predictor, in file order.
pub fn read_dataset(path: &Path, ordering: Ordering) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_dataset(file, path, ordering)
}

pub fn parse_dataset(reader: impl Read, path: &Path, ordering: Ordering) -> Result<Dataset> {
    let input_err = |line: u64, msg: String| CliError::Input {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| input_err(1, "missing required column 'y' in header".into()))?;
    let names: Vec<&str> = headers.iter().collect();
    let mut y = Vec::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(record.len().saturating_sub(1));
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                input_err(
                    line,
                    format!("column '{}': cannot parse '{field}' as a number", names[c]),
                )
            })?;
            if !v.is_finite() {
                return Err(input_err(
                    line,
                    format!("column '{}': value {field} is not finite", names[c]),
                ));
            }
            if c == y_col {
                y.push(v);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }
    Ok(Dataset::new(y, rows, ordering)?)
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.position() {
        Some(p) => CliError::Input {
            path: path.to_path_buf(),
            line: p.line(),
            msg: match e.kind() {
                csv::ErrorKind::UnequalLengths {
                    expected_len, len, ..
                } => {
                    format!("expected {expected_len} fields, found {len}")
                }
                _ => e.to_string(),
            },
        },
        None => CliError::Csv(e),
    }
}

pub fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

pub const CURVE_HEADER: [&str; 13] = [
    "K",
    "branch",
    "sigma_term",
    "rc",
    "varsigma",
    "kappa",
    "confidence",
    "rhs_min",
    "argmin_b",
    "feasible",
    "reason",
    "autocov_time",
    "seed",
];

/// One row per candidate K; `argmin_b` holds the hypothesis label.
pub fn write_curve(path: &Path, curve: &[CurveRow], labels: &[String], seed: u64) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CURVE_HEADER)?;
    for r in curve {
        w.write_record([
            r.k.to_string(),
            r.branch.map(|b| b.as_str().to_string()).unwrap_or_default(),
            opt(r.sigma_term),
            opt(r.rc),
            opt(r.varsigma),
            opt(r.kappa),
            num(r.confidence),
            opt(r.rhs_min),
            r.argmin_b.map(|b| labels[b].clone()).unwrap_or_default(),
            r.feasible.to_string(),
            r.reason.clone().unwrap_or_default(),
            opt(r.autocov_time),
            seed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub const RISKS_HEADER: [&str; 8] = [
    "k",
    "round",
    "hypothesis",
    "train_err",
    "test_err",
    "u",
    "t",
    "seed",
];

/// Long format: one row per (round, hypothesis).
pub fn write_risks(path: &Path, rs: &RiskSummary, labels: &[String], seed: u64) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RISKS_HEADER)?;
    for q in 0..rs.k {
        for (j, label) in labels.iter().enumerate() {
            w.write_record([
                rs.k.to_string(),
                (q + 1).to_string(),
                label.clone(),
                num(rs.train_err[q][j]),
                num(rs.test_err[q][j]),
                num(rs.u[q]),
                num(rs.t[q]),
                seed.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        parse_dataset(text.as_bytes(), Path::new("d.csv"), Ordering::Exchangeable)
    }

    #[test]
    fn reads_y_and_predictors() {
        let d = parse("y,x1,x2\n1,2,3\n4,5,6\n7,8,9\n10,11,12\n").unwrap();
        assert_eq!((d.n(), d.p()), (4, 2));
        assert_eq!(d.y(), &[1.0, 4.0, 7.0, 10.0]);
        assert_eq!(d.row(3), &[11.0, 12.0]);
    }

    #[test]
    fn y_may_sit_anywhere() {
        let d = parse("x1,y\n2,1\n5,4\n8,7\n11,10\n").unwrap();
        assert_eq!(d.y(), &[1.0, 4.0, 7.0, 10.0]);
        assert_eq!(d.row(0), &[2.0]);
    }

    #[test]
    fn missing_y_is_named() {
        let err = parse("target,x1\n1,2\n").unwrap_err().to_string();
        assert!(err.contains("'y'"), "{err}");
    }

    #[test]
    fn bad_number_reports_line_and_column() {
        let err = parse("y,x1\n1,2\n3,abc\n").unwrap_err().to_string();
        assert!(
            err.contains("d.csv:3:") && err.contains("'x1'") && err.contains("abc"),
            "{err}"
        );
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse("y,x1\n1,2\n3,4,5\n").unwrap_err().to_string();
        assert!(err.contains("d.csv:3:"), "{err}");
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456789.125, -0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(2.0), "2");
    }
}
