//! Workspace-wide error type.
//!
//! Every fallible public operation in this crate returns [`Result`]. The
//! variants group failures by what the caller can do about them: bad inputs
//! (`Config`, `Parse`, `Schema`), undefined computations (`Metric`), broken
//! model files (`Model`), and I/O trouble (`Io`). The CLI maps each group to a
//! distinct process exit code.

use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or parameters (out-of-range values, impossible
    /// combinations, empty required inputs).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A text input (scenario file, CSV, key table) could not be parsed.
    /// Carries the source location so users can find the offending line.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Data did not match an expected schema (missing columns, feature-order
    /// mismatch, unknown labels).
    #[error("schema mismatch: {0}")]
    Schema(String),

    /// A metric is mathematically undefined for the given inputs.
    #[error("undefined metric: {0}")]
    Metric(String),

    /// A model file is corrupt, truncated, or from an unsupported format
    /// version.
    #[error("invalid model file: {0}")]
    Model(String),

    /// An underlying I/O operation failed.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wraps an I/O error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Builds a parse error for a specific line of a text input.
    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
