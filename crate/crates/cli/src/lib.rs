//! Configs, persistence and experiment commands around `zerodelay-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod matrix_io;
pub mod persist;
pub mod results;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
