//! Shared error type for the crate.

/// Errors produced by parsing, validation, and I/O across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A text input failed to parse. `line` is 1-based within the source.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Inputs were well-formed but violate a contract (shape mismatch,
    /// out-of-range argument, incompatible model, ...).
    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
