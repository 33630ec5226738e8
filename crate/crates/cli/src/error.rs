use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(infomarkets::Error),

    #[error("solver error: {0}")]
    Solver(infomarkets::Error),

    #[error("{0} guaranteed equivalence check(s) disagreed")]
    Violation(usize),

    #[error("{0} oracle cross-check(s) failed")]
    Verification(usize),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) | CliError::Io { .. } => 1,
            CliError::Solver(_) | CliError::Verification(_) => 2,
            CliError::Violation(_) => 3,
        }
    }
}

impl From<infomarkets::Error> for CliError {
    fn from(e: infomarkets::Error) -> Self {
        use infomarkets::Error::*;
        match e {
            UndefinedPrice
            | BracketingFailure { .. }
            | SolverFailure(_)
            | AsymmetricAccuracy { .. }
            | OptimalityViolated { .. } => CliError::Solver(e),
            _ => CliError::Input(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
