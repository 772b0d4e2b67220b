//! Experiment runner for `adjoint-dae`: reads a TOML sweep description, runs
//! forward, adjoint and reference solves per `(dt, T)` cell, and writes the
//! resulting error/effectivity table as CSV or markdown.

pub mod config;
pub mod report;
pub mod runner;

use std::path::PathBuf;

pub use config::{Experiment, ExperimentConfig, Format, Method, SCHEMA_VERSION};
pub use report::{emit_report, Outcome, Row, RowValues, Table};
pub use runner::run_experiment;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Library(#[from] adjoint_dae::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("refusing to write an empty table")]
    EmptyTable,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed table: {0}")]
    Parse(String),
}
