use thiserror::Error;

/// Errors raised by geometry, objective, solver and experiment code.
#[derive(Debug, Error)]
pub enum Error {
    /// A point lies outside the domain of a reference function or objective.
    #[error("domain error: {0}")]
    Domain(String),

    /// The D-optimal information matrix is not positive definite.
    #[error("information matrix is singular or indefinite at the given point")]
    SingularInformation,

    /// Malformed arguments (wrong lengths, non-finite values, bad dimensions).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Solver configuration violates its invariants.
    #[error("invalid solver configuration: {0}")]
    Config(String),

    /// A sampled or iterative estimator could not produce a value.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A sampled inequality required by a construction did not hold.
    #[error("{inequality} violated by {violation:.3e} on a sampled pair")]
    Violation {
        inequality: &'static str,
        violation: f64,
        x: Vec<f64>,
        y: Vec<f64>,
    },

    /// Instance or trace file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
