//! CSV output of experiment reports and traces.
//!
//! Fixed schemas, LF newlines, floats with 17 significant digits so a parsed
//! report reproduces the in-memory one exactly.
//!
//! Report columns:
//! `distribution,m,k_n,tau,estimator,bias,abs_bias,rmse,emp_variance,n_failures`
//!
//! Trace columns:
//! `distribution,m,k_n,tau,estimator,estimate` (failed cells print `nan`)

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::SimError;
use crate::numeric::{fmt17, parse17};
use crate::sim::{ExperimentReport, ReportRow, SingleSampleTrace};

pub const REPORT_HEADER: &str =
    "distribution,m,k_n,tau,estimator,bias,abs_bias,rmse,emp_variance,n_failures";
pub const TRACE_HEADER: &str = "distribution,m,k_n,tau,estimator,estimate";

fn io_err(path: &Path, source: std::io::Error) -> SimError {
    SimError::Io { path: path.display().to_string(), source }
}

/// Writes the report rows as CSV. Byte-deterministic for a given report.
pub fn write_report_csv(report: &ExperimentReport, path: &Path) -> Result<(), SimError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_report(&mut w, report).map_err(|e| io_err(path, e))
}

fn write_report<W: Write>(w: &mut W, report: &ExperimentReport) -> std::io::Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.distribution,
            r.m,
            r.k_n,
            fmt17(r.tau),
            r.estimator,
            fmt17(r.bias),
            fmt17(r.abs_bias),
            fmt17(r.rmse),
            fmt17(r.emp_variance),
            r.n_failures
        )?;
    }
    w.flush()
}

/// Renders the report to a string (used by tests and the CLI).
pub fn report_to_csv_string(report: &ExperimentReport) -> String {
    let mut buf = Vec::new();
    write_report(&mut buf, report).expect("write to Vec cannot fail");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

/// Reads back a report CSV written by [`write_report_csv`].
pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>, SimError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let display = path.display().to_string();
    let malformed = |line: usize, reason: &str| SimError::MalformedCsv {
        path: display.clone(),
        line,
        reason: reason.to_string(),
    };
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if i == 0 {
            if line != REPORT_HEADER {
                return Err(malformed(1, "unexpected header"));
            }
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 10 {
            return Err(malformed(i + 1, "expected 10 columns"));
        }
        let float = |idx: usize| -> Result<f64, SimError> {
            parse17(parts[idx]).map_err(|_| malformed(i + 1, "bad float"))
        };
        let int = |idx: usize| -> Result<usize, SimError> {
            parts[idx].parse().map_err(|_| malformed(i + 1, "bad integer"))
        };
        rows.push(ReportRow {
            distribution: parts[0].to_string(),
            m: int(1)?,
            k_n: int(2)?,
            tau: float(3)?,
            estimator: parts[4].to_string(),
            bias: float(5)?,
            abs_bias: float(6)?,
            rmse: float(7)?,
            emp_variance: float(8)?,
            n_failures: int(9)?,
        });
    }
    Ok(rows)
}

/// Writes a single-sample trace as CSV.
pub fn write_trace_csv(trace: &SingleSampleTrace, path: &Path) -> Result<(), SimError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut inner = || -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &trace.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.distribution,
                r.m,
                r.k_n,
                fmt17(r.tau),
                r.estimator,
                r.estimate.map_or_else(|| "nan".to_string(), fmt17),
            )?;
        }
        w.flush()
    };
    inner().map_err(|e| io_err(path, e))
}
