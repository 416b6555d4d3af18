//! Command-line front end: configuration, pipeline stages and the
//! reproduction harness behind the `lure-forge` binary.

pub mod checks;
pub mod config;
pub mod pipeline;
pub mod repro;

use lure_forge::LureError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("acceptance failed: {0}")]
    Acceptance(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Solver(_) => 3,
            Self::Acceptance(_) => 4,
            Self::Io(_) => 1,
        }
    }
}

impl From<LureError> for CliError {
    fn from(e: LureError) -> Self {
        match e {
            LureError::SolverFailure(_)
            | LureError::BracketInfeasible { .. }
            | LureError::ConvergenceFailure(_)
            | LureError::NotConverged { .. }
            | LureError::NonFiniteState { .. } => Self::Solver(e.to_string()),
            other => Self::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
