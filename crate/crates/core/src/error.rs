use thiserror::Error;

/// Errors raised by the payoff, strategy and learner routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("infeasible strategy: {0}")]
    Infeasible(String),

    /// The Markov chain has more than one closed communicating class, so the
    /// undiscounted payoff ratio is 0/0.
    #[error("degenerate chain: |denominator| = {denominator:e} (stationary distribution not unique)")]
    DegenerateChain { denominator: f64 },

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("singular linear system")]
    Singular,

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
