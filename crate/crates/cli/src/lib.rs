//! Experiment orchestration for the `mia-audit` binary.
//!
//! Wires the core library into the four CLI commands: `generate-data`,
//! `run`, `scaling-sweep`, and `report`. Everything is driven by one JSON
//! config plus a master seed; a run writes its datasets, models, attacks,
//! records, and reports under one output directory together with a manifest
//! describing the artifacts and per-stage wall-clock times.

pub mod config;
pub mod manifest;
pub mod report;
pub mod run;
pub mod scenario;
pub mod sweep;

use std::fmt;

/// CLI-level error split by exit code: usage errors exit 1, runtime
/// failures exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mia_core::Error> for CliError {
    fn from(err: mia_core::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn io_runtime(context: &str, err: std::io::Error) -> CliError {
    CliError::Runtime(format!("{context}: {err}"))
}
