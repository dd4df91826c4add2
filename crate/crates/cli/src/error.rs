use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("solver failure: {source}")]
    Solver {
        #[source]
        source: stfv::Error,
    },

    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Io { .. } => 1,
            Self::Solver { .. } => 2,
            Self::Verification(_) => 3,
        }
    }
}

impl From<stfv::Error> for CliError {
    fn from(source: stfv::Error) -> Self {
        Self::Solver { source }
    }
}
