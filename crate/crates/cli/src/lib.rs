//! Command-line pipeline for place-recognition experiments: dataset
//! synthesis, training, localization, the SAD baseline, evaluation, and
//! parameter sweeps.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod plot;
pub mod synth;

use std::path::Path;

/// CLI-level error, split by exit code: validation failures exit 1, I/O
/// failures exit 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(msg) | CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> CliError {
        CliError::Validation(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> CliError {
        CliError::Io(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<lens_core::Error> for CliError {
    fn from(err: lens_core::Error) -> CliError {
        match err {
            lens_core::Error::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> CliError {
        CliError::Io(err.to_string())
    }
}

/// Attaches the originating file to a core error.
pub(crate) fn with_path(err: lens_core::Error, path: &Path) -> CliError {
    match err {
        lens_core::Error::Io(e) => CliError::Io(format!("{}: {e}", path.display())),
        lens_core::Error::Parse { line, msg } => {
            CliError::Validation(format!("{}:{line}: {msg}", path.display()))
        }
        lens_core::Error::Invalid(msg) => {
            CliError::Validation(format!("{}: {msg}", path.display()))
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
