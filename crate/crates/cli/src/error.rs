use std::path::PathBuf;

use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] gps_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    /// At least one seed aborted on a numerical failure; artifacts are partial.
    #[error("{0}")]
    RunFailed(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit status: 2 configuration, 3 data or format, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        use gps_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Core(E::Config(_)) => 2,
            CliError::Core(E::Numerical { .. }) | CliError::RunFailed(_) => 4,
            CliError::Core(_) | CliError::Io { .. } => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
