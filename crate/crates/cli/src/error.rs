use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const NOT_MINORIZABLE: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("kernel is not minorizable: {0}")]
    NotMinorizable(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("certificate rejected: {0}")]
    Certificate(String),
    #[error("{failed} invariant(s) outside their thresholds")]
    Thresholds { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Read { .. } => exit::CONFIG,
            CliError::NotMinorizable(_) => exit::NOT_MINORIZABLE,
            CliError::Write { .. }
            | CliError::Numerical(_)
            | CliError::Certificate(_)
            | CliError::Thresholds { .. } => exit::NUMERICAL,
        }
    }
}

impl From<doeblin_core::Error> for CliError {
    fn from(e: doeblin_core::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
