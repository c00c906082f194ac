use std::path::PathBuf;

use thiserror::Error;

/// Everything that makes a run unusable before or while checks execute.
/// All of these map to exit status 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("in expression at `{location}`: {source}")]
    Expression {
        location: String,
        #[source]
        source: hydrocheck::Error,
    },

    #[error("invalid flag {flag}: {message}")]
    Flag { flag: String, message: String },

    #[error(transparent)]
    Core(#[from] hydrocheck::Error),
}

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn flag(flag: &str, message: impl Into<String>) -> Self {
        CliError::Flag {
            flag: flag.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
