//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by operator evaluations, quadratures and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A resolvent was requested at (or numerically too close to) a spectral point.
    #[error("resolvent unavailable at lambda = {lambda}: {message}")]
    SpectralPoint { lambda: f64, message: String },

    /// An iterative limit failed its convergence test. `history` carries the
    /// successive residuals/increments observed before giving up.
    #[error("convergence failure: {message} (history: {history:?})")]
    Convergence { message: String, history: Vec<f64> },

    /// An input was outside the (behaviorally represented) operator domain.
    #[error("domain violation: {0}")]
    Domain(String),

    /// A time was not aligned to the transport grid step.
    #[error("time {value} is not an integer multiple of the grid step {step}")]
    Alignment { value: f64, step: f64 },

    /// A linear solve or other numerical kernel failed unexpectedly.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Expression syntax error at a byte offset, with the tokens that would
    /// have been accepted there.
    #[error("syntax error at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },

    /// Unknown identifier in an expression.
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    /// Runtime expression evaluation error (division by zero, sqrt of a
    /// negative number) at the offending node's source offset.
    #[error("evaluation error at offset {offset}: {message}")]
    Eval { offset: usize, message: String },

    /// Scenario-file validation error; the message names the violated rule.
    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn scenario(msg: impl Into<String>) -> Self {
        Error::Scenario(msg.into())
    }
}
