//! Command-line runner for the atomcurrent simulator.

pub mod angle;
pub mod config;
pub mod filter;
pub mod output;
pub mod presets;
pub mod runner;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<atomcurrent::Error> for CliError {
    fn from(e: atomcurrent::Error) -> Self {
        use atomcurrent::Error::*;
        match e {
            NumericalAbort { .. } | NoConvergence { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
