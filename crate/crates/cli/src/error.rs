//! Process-level failure classes and their exit codes.
//!
//! Every failure the tool can hit maps to one of three classes: bad input
//! (configuration, file formats, flag combinations), a solver giving up on
//! the configured scenario, or a quantitative check coming out negative.
//! The shell contract is exit code 2, 3 and 4 respectively; 0 is success.

use ripvisc_core::SolverError;
use thiserror::Error;

/// One failure, tagged with its exit-code class.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unusable input: config grammar, invalid values, missing or
    /// malformed files, inapplicable flags.
    #[error("{0}")]
    Config(String),

    /// A solver rejected the scenario (incompatible load, divergence).
    #[error("{0}")]
    Solver(#[from] SolverError),

    /// A quantitative audit ran to completion and failed.
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Check(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o failure: {e}"))
    }
}

/// Shorthand for config-class errors built from format strings.
pub fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
