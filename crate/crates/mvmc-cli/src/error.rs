//! Command-line error type with process exit codes.

use thiserror::Error;

/// Exit code for configuration problems (bad flags, bad config file).
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for data problems (missing/malformed files, shape mismatches).
pub const EXIT_DATA: i32 = 3;
/// Exit code for numerical solver failures.
pub const EXIT_SOLVER: i32 = 4;

/// Top-level error: every failure is classified for the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("solver error: {0}")]
    Solver(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        CliError::Solver(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }

    /// Classify a core library error raised while handling input data.
    pub fn from_data_stage(e: mvmc_core::Error) -> Self {
        match e {
            mvmc_core::Error::SolverFailure(m) | mvmc_core::Error::Linalg(m) => {
                CliError::Solver(m)
            }
            other => CliError::Data(other.to_string()),
        }
    }

    /// Classify a core library error raised while training or predicting.
    pub fn from_solver_stage(e: mvmc_core::Error) -> Self {
        match e {
            mvmc_core::Error::SolverFailure(m) | mvmc_core::Error::Linalg(m) => {
                CliError::Solver(m)
            }
            // Shape or argument problems at solve time trace back to the
            // ingested data.
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
