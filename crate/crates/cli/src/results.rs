//! Result rows and the CSV file they are appended to.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::persist::write_atomic;

pub const HEADER: [&str; 8] = [
    "experiment",
    "scheme",
    "N",
    "rate",
    "seed",
    "avg_distortion",
    "discounted_distortion",
    "fallback_rate",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub scheme: String,
    /// Empty for baselines.
    pub n: Option<usize>,
    pub rate: f64,
    pub seed: u64,
    pub avg_distortion: f64,
    pub discounted_distortion: f64,
    pub fallback_rate: f64,
}

impl Row {
    fn record(&self) -> [String; 8] {
        [
            self.experiment.clone(),
            self.scheme.clone(),
            self.n.map(|n| n.to_string()).unwrap_or_default(),
            format!("{}", self.rate),
            self.seed.to_string(),
            format!("{:?}", self.avg_distortion),
            format!("{:?}", self.discounted_distortion),
            format!("{:?}", self.fallback_rate),
        ]
    }
}

/// Results file for a config; the name carries the config hash.
pub fn results_path(dir: &Path, config_hash: &str) -> PathBuf {
    dir.join(format!("results-{}.csv", &config_hash[..16]))
}

/// Appends `rows` by rewriting the whole file through a temp file. A new
/// file gets the header even when `rows` is empty.
pub fn append(path: &Path, rows: &[Row]) -> Result<()> {
    let existing = match fs::read(path) {
        Ok(b) => Some(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(CliError::io(path, e)),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    match &existing {
        Some(bytes) => {
            let mut r = csv::Reader::from_reader(bytes.as_slice());
            if r.headers()?.iter().ne(HEADER) {
                return Err(CliError::Validation(format!(
                    "{} has an unexpected header",
                    path.display()
                )));
            }
            w.write_record(HEADER)?;
            for rec in r.records() {
                w.write_record(&rec?)?;
            }
        }
        None => w.write_record(HEADER)?,
    }
    for row in rows {
        w.write_record(row.record())?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}
