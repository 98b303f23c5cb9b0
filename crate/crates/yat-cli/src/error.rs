use thiserror::Error;

/// Harness-level errors, mapped onto process exit codes by `main`.
#[derive(Debug, Error)]
pub enum CliError {
    /// Usage or configuration problems (exit code 2).
    #[error("{0}")]
    Config(String),

    /// Numerical failures inside an experiment (exit code 3).
    #[error(transparent)]
    Numerical(#[from] yat_core::YatError),

    /// I/O problems writing results (exit code 3).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}
