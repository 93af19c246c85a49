use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or scenario. Exit status 1.
    #[error("{0}")]
    Usage(String),
    /// File system failure. Exit status 2.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
        }
    }
}

impl From<kljn_core::Error> for CliError {
    fn from(e: kljn_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<kljn_vanet::ScenarioError> for CliError {
    fn from(e: kljn_vanet::ScenarioError) -> Self {
        CliError::Usage(format!("invalid scenario: {e}"))
    }
}
