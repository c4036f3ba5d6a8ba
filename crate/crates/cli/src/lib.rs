//! Library backing the `safemrac` command line tool: config loading,
//! experiment orchestration, artifact serialization, and figure emission.

use thiserror::Error;

pub mod config;
pub mod experiment;
pub mod figures;
pub mod output;
pub mod verify;

/// Errors that terminate a CLI action with exit code 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}
