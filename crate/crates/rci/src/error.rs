use thiserror::Error;

/// Errors reported by the solvers and the finite-size simulator.
#[derive(Debug, Error)]
pub enum RciError {
    /// An argument is outside the documented domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The scenario admits no feasible allocation.
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    /// A linear system could not be solved.
    #[error("singular system: {0}")]
    Singular(String),
    /// A grid search would exceed the configured cost cap.
    #[error("grid too large: {0}")]
    GridTooLarge(String),
}

pub type Result<T> = std::result::Result<T, RciError>;
