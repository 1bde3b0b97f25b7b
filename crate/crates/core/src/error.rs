//! Crate-wide error type.
//!
//! Variants map onto the harness exit codes: infeasible configurations
//! (power or bandwidth budgets that cannot be met) exit with 2, failed
//! experiment invariants with 3, everything else with 1.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("truncated input: {0}")]
    TruncatedInput(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("bitstream decode error: {0}")]
    Decode(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("experiment anomaly: {0}")]
    Anomaly(String),
}

pub type Result<T> = std::result::Result<T, Error>;
