//! Result rows, CSV round-trip and the JSON sidecar.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub method: String,
    pub err_inf: f64,
    pub err_spec: f64,
    pub err_inf_rescaled: f64,
    pub err_spec_rescaled: f64,
    pub subspace_err: Option<f64>,
    pub wall_ms: f64,
}

pub const CSV_HEADER: [&str; 13] = [
    "experiment",
    "d",
    "m",
    "n",
    "trial",
    "seed",
    "method",
    "err_inf",
    "err_spec",
    "err_inf_rescaled",
    "err_spec_rescaled",
    "subspace_err",
    "wall_ms",
];

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    Header { expected: Vec<String>, found: Vec<String> },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), CsvError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Parses a results file, insisting on the exact header and nonnegative errors.
pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>, CsvError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if found != CSV_HEADER {
        return Err(CsvError::Header {
            expected: CSV_HEADER.iter().map(|s| s.to_string()).collect(),
            found,
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<ResultRow>().enumerate() {
        let row = rec?;
        let errs = [row.err_inf, row.err_spec, row.err_inf_rescaled, row.err_spec_rescaled];
        if errs.iter().chain(row.subspace_err.iter()).any(|e| !(*e >= 0.0)) {
            return Err(CsvError::Row {
                row: i + 1,
                message: "errors must be nonnegative numbers".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// `results.csv` → `results.meta.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

/// `covest <version> (<git rev>)`; the revision is `unknown` outside a checkout.
pub fn version_string() -> String {
    let rev = std::process::Command::new("git")
        .args(["-C", env!("CARGO_MANIFEST_DIR"), "rev-parse", "--short", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into());
    format!("covest {} ({rev})", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Serialize)]
pub struct Sidecar<'a, S: Serialize> {
    pub version: String,
    pub config: &'a ExperimentConfig,
    pub summary: S,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
