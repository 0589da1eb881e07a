use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration or input document that does not parse or fails its
    /// schema; `pointer` is the JSON pointer of the offending field.
    #[error("{file}: invalid value at '{pointer}': {message}")]
    Config {
        file: String,
        pointer: String,
        message: String,
    },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Input {
        context: String,
        #[source]
        source: qib_core::Error,
    },

    #[error(transparent)]
    Core(#[from] qib_core::Error),
}

impl CliError {
    /// 2 for numerical failures of the engines, 1 for everything the user
    /// can fix in the inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
