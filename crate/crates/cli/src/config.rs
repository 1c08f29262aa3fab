//! Flat `key = value` experiment configs.
//!
//! ```text
//! # comment
//! name = markov4
//! source = markov4.txt              # matrix file, relative to this file
//! channel = symmetric 4 0.06        # or `noiseless 4`, or a matrix file
//! distortion = squared              # or a matrix file
//! scheme = window
//! n = 1, 2, 3
//! beta = 0.9999
//! seeds = 1, 2, 3, 4, 5
//! ```
//!
//! The config hash is SHA-256 over a canonical rendering of every resolved
//! value except `output_dir`. Matrix files enter by content, not by path.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};
use zerodelay_core::eval::DecoderMode;
use zerodelay_core::matrix::StochasticMatrix;
use zerodelay_core::model::{ChannelKernel, DistortionFn, SystemSpec, TransitionKernel};
use zerodelay_core::qlearn::{LearningConfig, Scheme};
use zerodelay_core::quantizer::{Pruning, QuantizerSet, DEFAULT_SET_CAP};
use zerodelay_core::window::DEFAULT_DENSE_CAP;
use zerodelay_core::lattice::DEFAULT_LATTICE_CAP;

use crate::error::{CliError, Result};
use crate::matrix_io::{format_matrix, parse_number, read_matrix};

const KEYS: &[&str] = &[
    "name",
    "source",
    "normalize_source",
    "channel",
    "distortion",
    "source_values",
    "xhat_values",
    "scheme",
    "n",
    "beta",
    "horizon",
    "seeds",
    "seed",
    "epsilon_stop",
    "check_interval",
    "max_steps",
    "pruning",
    "quantizer_cap",
    "lattice_cap",
    "dense_cap",
    "v0",
    "decoder",
    "output_dir",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Distortion {
    Squared,
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub source: Vec<Vec<f64>>,
    pub normalize_source: bool,
    pub channel: Vec<Vec<f64>>,
    pub distortion: Distortion,
    pub source_values: Vec<f64>,
    pub xhat_values: Vec<f64>,
    pub scheme: Scheme,
    pub n: Vec<usize>,
    pub beta: f64,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    /// Root seed for training.
    pub seed: u64,
    pub epsilon_stop: f64,
    pub check_interval: u64,
    pub max_steps: u64,
    pub pruning: Pruning,
    pub quantizer_cap: usize,
    pub lattice_cap: u128,
    pub dense_cap: u64,
    pub v0: f64,
    /// `window-table` by default for the window scheme; always
    /// `true-belief` for the lattice scheme.
    pub decoder: DecoderMode,
    pub output_dir: PathBuf,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| invalid(format!("{key}: `{t}` is not valid"))))
        .collect()
}

fn scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(format!("{key}: `{value}` is not valid")))
}

fn numbers(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_number(t).ok_or_else(|| invalid(format!("{key}: `{t}` is not a number"))))
        .collect()
}

fn channel_rows(value: &str, base: &Path) -> Result<Vec<Vec<f64>>> {
    let words: Vec<&str> = value.split_whitespace().collect();
    match words.as_slice() {
        ["noiseless", k] => Ok(StochasticMatrix::identity(scalar("channel", k)?).to_rows()),
        ["symmetric", k, e] => {
            let e = parse_number(e).ok_or_else(|| invalid("channel: bad error probability"))?;
            Ok(StochasticMatrix::symmetric(scalar("channel", k)?, e)?.to_rows())
        }
        _ => read_matrix(&base.join(value)),
    }
}

/// Splits `key = value` lines, dropping comments and blanks.
pub fn parse_pairs(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| CliError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".into()))?;
        let k = k.trim().to_ascii_lowercase();
        if !KEYS.contains(&k.as_str()) {
            return Err(err(format!("unknown key `{k}`")));
        }
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(err(format!("duplicate key `{k}`")));
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let default_name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "experiment".into());
        Self::from_pairs(parse_pairs(&text, path)?, base, &default_name)
    }

    pub fn from_pairs(
        mut kv: BTreeMap<String, String>,
        base: &Path,
        default_name: &str,
    ) -> Result<Self> {
        let explicit_decoder = kv.contains_key("decoder");
        let mut take = |k: &str| kv.remove(k);
        let source_path = take("source").ok_or_else(|| invalid("missing key `source`"))?;
        let source = read_matrix(&base.join(&source_path))?;
        let channel = channel_rows(
            &take("channel").ok_or_else(|| invalid("missing key `channel`"))?,
            base,
        )?;
        let distortion = match take("distortion").as_deref() {
            None | Some("squared") => Distortion::Squared,
            Some(p) => Distortion::Matrix(read_matrix(&base.join(p))?),
        };
        let x = source.len();
        let source_values = match take("source_values") {
            Some(v) => numbers("source_values", &v)?,
            None => (0..x).map(|i| i as f64).collect(),
        };
        let xhat_values = match take("xhat_values") {
            Some(v) => numbers("xhat_values", &v)?,
            None => match &distortion {
                Distortion::Squared => source_values.clone(),
                Distortion::Matrix(rows) => (0..rows[0].len()).map(|i| i as f64).collect(),
            },
        };
        let mut cfg = Self {
            name: take("name").unwrap_or_else(|| default_name.to_string()),
            source,
            normalize_source: match take("normalize_source") {
                Some(v) => scalar("normalize_source", &v)?,
                None => false,
            },
            channel,
            distortion,
            source_values,
            xhat_values,
            scheme: match take("scheme") {
                Some(v) => Scheme::parse(&v)?,
                None => Scheme::Window,
            },
            n: match take("n") {
                Some(v) => list("n", &v)?,
                None => vec![1],
            },
            beta: take("beta").map_or(Ok(0.9999), |v| scalar("beta", &v))?,
            horizon: take("horizon").map_or(Ok(100_000), |v| scalar("horizon", &v))?,
            seeds: match take("seeds") {
                Some(v) => list("seeds", &v)?,
                None => vec![1, 2, 3, 4, 5],
            },
            seed: take("seed").map_or(Ok(0), |v| scalar("seed", &v))?,
            epsilon_stop: take("epsilon_stop").map_or(Ok(1e-4), |v| scalar("epsilon_stop", &v))?,
            check_interval: take("check_interval")
                .map_or(Ok(100_000), |v| scalar("check_interval", &v))?,
            max_steps: take("max_steps").map_or(Ok(1_000_000), |v| scalar("max_steps", &v))?,
            pruning: match take("pruning") {
                Some(v) => Pruning::parse(&v)?,
                None => Pruning::NONE,
            },
            quantizer_cap: take("quantizer_cap")
                .map_or(Ok(DEFAULT_SET_CAP), |v| scalar("quantizer_cap", &v))?,
            lattice_cap: take("lattice_cap")
                .map_or(Ok(DEFAULT_LATTICE_CAP), |v| scalar("lattice_cap", &v))?,
            dense_cap: take("dense_cap").map_or(Ok(DEFAULT_DENSE_CAP), |v| scalar("dense_cap", &v))?,
            v0: take("v0").map_or(Ok(0.0), |v| scalar("v0", &v))?,
            decoder: match take("decoder").as_deref() {
                None => DecoderMode::Window,
                Some("true-belief") => DecoderMode::TrueBelief,
                Some("window-table") => DecoderMode::Window,
                Some(other) => return Err(invalid(format!("decoder: unknown mode `{other}`"))),
            },
            output_dir: base.join(take("output_dir").unwrap_or_else(|| "out".into())),
        };
        if cfg.scheme == Scheme::Lattice {
            if cfg.decoder == DecoderMode::Window && explicit_decoder {
                return Err(invalid("decoder = window-table needs scheme = window"));
            }
            cfg.decoder = DecoderMode::TrueBelief;
        }
        if cfg.n.is_empty() || cfg.n.contains(&0) {
            return Err(invalid("n must list positive window lengths or resolutions"));
        }
        Ok(cfg)
    }

    pub fn system(&self) -> Result<SystemSpec> {
        let source = if self.normalize_source {
            let (m, dev) = StochasticMatrix::from_rows_normalized(&self.source)?;
            log::info!("source rows rescaled, largest row-sum deviation {dev:.2e}");
            TransitionKernel::new(m)?
        } else {
            TransitionKernel::from_rows(&self.source)?
        };
        let distortion = match &self.distortion {
            Distortion::Squared => DistortionFn::squared(&self.source_values, &self.xhat_values)?,
            Distortion::Matrix(rows) => DistortionFn::from_rows(rows)?,
        };
        Ok(SystemSpec::new(
            source,
            ChannelKernel::from_rows(&self.channel)?,
            distortion,
            self.xhat_values.clone(),
            self.beta,
        )?)
    }

    pub fn quantizers(&self, spec: &SystemSpec) -> Result<QuantizerSet> {
        Ok(spec.quantizer_set(self.pruning, self.quantizer_cap)?)
    }

    pub fn build(&self) -> Result<(Arc<SystemSpec>, Arc<QuantizerSet>)> {
        let spec = self.system()?;
        let set = self.quantizers(&spec)?;
        Ok((Arc::new(spec), Arc::new(set)))
    }

    pub fn learning(&self, n: usize) -> LearningConfig {
        let mut c = LearningConfig::new(self.scheme, n, self.beta);
        c.v0 = self.v0;
        c.epsilon_stop = self.epsilon_stop;
        c.check_interval = self.check_interval;
        c.max_steps = self.max_steps;
        c.seed = self.seed;
        c.lattice_cap = self.lattice_cap;
        c.dense_cap = self.dense_cap;
        c
    }

    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let dist = match &self.distortion {
            Distortion::Squared => "squared\n".to_string(),
            Distortion::Matrix(rows) => format_matrix(rows),
        };
        let _ = write!(
            s,
            "name={}\nsource=\n{}normalize_source={}\nchannel=\n{}distortion=\n{}\
             source_values={:?}\nxhat_values={:?}\nscheme={}\nn={:?}\nbeta={:?}\nhorizon={}\n\
             seeds={:?}\nseed={}\nepsilon_stop={:?}\ncheck_interval={}\nmax_steps={}\n\
             pruning={}\nquantizer_cap={}\nlattice_cap={}\ndense_cap={}\nv0={:?}\ndecoder={}\n",
            self.name,
            format_matrix(&self.source),
            self.normalize_source,
            format_matrix(&self.channel),
            dist,
            self.source_values,
            self.xhat_values,
            self.scheme.name(),
            self.n,
            self.beta,
            self.horizon,
            self.seeds,
            self.seed,
            self.epsilon_stop,
            self.check_interval,
            self.max_steps,
            self.pruning,
            self.quantizer_cap,
            self.lattice_cap,
            self.dense_cap,
            self.v0,
            self.decoder.name(),
        );
        s
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// `log2 |M|`.
    pub fn rate(&self) -> f64 {
        (self.channel.len() as f64).log2()
    }
}
