use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("activation undefined for the zero state vector")]
    UndefinedActivation,

    #[error("degenerate activation: raw sum {0:e} below threshold")]
    DegenerateActivation(f64),

    #[error("invalid transition matrix: {0}")]
    InvalidTransitionMatrix(String),

    /// Integration produced a non-finite value. Carries the last finite state.
    #[error("numerical divergence at t={t}")]
    Divergence { t: f64, last_state: Vec<f64> },

    #[error("no goal or primitive attached to active slot {0}")]
    MissingGoal(String),

    #[error("matrix is not symmetric positive-definite")]
    NotPositiveDefinite,

    #[error("invalid motion primitive: {0}")]
    InvalidPrimitive(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
