use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// An input value outside its documented range.
    #[error("{path}{}: field `{field}`: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Validation { path: PathBuf, field: String, line: Option<usize>, message: String },

    #[error(transparent)]
    Engine(#[from] szilard_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Unreadable, malformed or invalid input, or an unwritable output.
    pub const INPUT: i32 = 1;
    /// An engine run failed for a reason other than a hard assertion.
    pub const RUN: i32 = 3;
    /// An internal consistency assertion fired.
    pub const ASSERTION: i32 = 2;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine(szilard_core::Error::Inconsistency(_)) => exit::ASSERTION,
            CliError::Engine(_) => exit::RUN,
            _ => exit::INPUT,
        }
    }
}
