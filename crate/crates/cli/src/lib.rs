//! Library side of the `h4bp` explorer: run configuration, record files,
//! SVG rendering and the four subcommands.

pub mod commands;
pub mod config;
pub mod records;
pub mod svg;

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    BadArguments(String),
    #[error("truncated families: {}", .0.join(", "))]
    Truncated(Vec<String>),
    #[error("{0}")]
    Io(String),
    #[error("corrupt or missing records: {0}")]
    Corrupt(String),
    /// Verification ran and at least one check failed.
    #[error("verification failed")]
    Failed,
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed => 1,
            CliError::BadArguments(_) => 2,
            CliError::Truncated(_) => 3,
            CliError::Io(_) => 4,
            CliError::Corrupt(_) => 5,
        }
    }
}
