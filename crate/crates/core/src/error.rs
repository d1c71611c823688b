use thiserror::Error;

/// Errors raised by the game, estimator, learning and reference-solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("point is not feasible for player {player}: {reason}")]
    Infeasible { player: usize, reason: String },

    #[error("update input lies outside its {set} set")]
    OutsideSet { set: &'static str },

    #[error("projection mode {mode} is not defined for strategy set {set}")]
    IncompatibleMode { mode: &'static str, set: &'static str },

    #[error("non-finite cost observed for player {player} at iteration {iteration}")]
    NonFiniteCost { player: usize, iteration: usize },

    #[error("game is not strongly monotone (smallest eigenvalue {lambda_min})")]
    NotStronglyMonotone { lambda_min: f64 },

    #[error("game does not provide {0}")]
    MissingOracle(&'static str),

    #[error("reference solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("reference certificate rejected: {0}")]
    Certificate(String),

    #[error("rate fit rejected: {0}")]
    RateFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
