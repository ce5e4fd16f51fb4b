use thiserror::Error;

/// Errors raised by the numerical kernels, problem constructors and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `Dh(x)` lost full row rank at the reported point.
    #[error("constraint Jacobian is rank deficient at x = {point:?} (sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e})")]
    RankDeficient {
        point: Vec<f64>,
        sigma_min: f64,
        sigma_max: f64,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("non-finite value while evaluating {0}")]
    NonFinite(String),

    /// No trial step satisfied both the decrease test and region membership.
    #[error("{kind} backtracking failed after {backtracks} reductions")]
    BacktrackFailure { kind: &'static str, backtracks: usize },

    #[error("feasibility flow: {0}")]
    StepSize(String),

    #[error("plateau scheme did not terminate within {0} plateaus")]
    NonTermination(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
