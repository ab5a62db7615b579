//! Runner errors and their process exit codes.

use std::path::Path;

use stratabc_core::AbcError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Every problem found in a configuration.
    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("sampler startup failed: {0}")]
    Startup(String),

    #[error("{context}: {source}")]
    Core { context: String, source: AbcError },

    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(vec![msg.into()])
    }

    /// Wraps a core error, keeping configuration and startup failures apart.
    pub fn core(context: impl Into<String>, e: AbcError) -> Self {
        let context = context.into();
        match e {
            AbcError::Startup(m) => CliError::Startup(format!("{context}: {m}")),
            AbcError::Config(m) => CliError::Config(vec![format!("{context}: {m}")]),
            source => CliError::Core { context, source },
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { context: path.display().to_string(), source }
    }

    /// 2 for configuration errors, 3 for startup failures, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Startup(_) => 3,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
