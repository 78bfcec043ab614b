use std::path::{Path, PathBuf};

use onsd_core::Error;

/// A failure with the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("pipeline error: {0}")]
    Pipeline(String),
    #[error("config error: {0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Pipeline(_) => 3,
            CliError::Config(_) => 4,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    /// Errors raised while loading frames or series.
    pub fn input(e: Error) -> Self {
        match e {
            Error::Stage { .. } => CliError::Pipeline(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }

    pub fn config(e: Error) -> Self {
        CliError::Config(e.to_string())
    }

    /// Errors from a pipeline run. Bad parameters that slipped past validation
    /// are still config problems.
    pub fn run(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
            other => CliError::Pipeline(other.to_string()),
        }
    }

    pub fn with_context(self, what: &str) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{what}: {m}")),
            CliError::Pipeline(m) => CliError::Pipeline(format!("{what}: {m}")),
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
        }
    }
}

pub fn stdout_err(e: std::io::Error) -> CliError {
    CliError::Pipeline(format!("writing output: {e}"))
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<PathBuf> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}
