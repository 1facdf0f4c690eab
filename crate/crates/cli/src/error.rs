use thiserror::Error;

/// Failures of a scenario run, each tied to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub(crate) fn config(line: usize, msg: impl std::fmt::Display) -> Self {
        Self::Config(format!("line {line}: {msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Output(_) => 4,
        }
    }
}

impl From<multibeam_core::Error> for CliError {
    fn from(e: multibeam_core::Error) -> Self {
        Self::Numerical(e.to_string())
    }
}
