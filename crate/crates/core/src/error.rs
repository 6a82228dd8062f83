use thiserror::Error;

use crate::tomo::Diagnostics;

/// Errors raised by the simulator and the estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("incompatible projection (success probability {0:.3e})")]
    IncompatibleProjection(f64),

    #[error("no retrievable population (detected fraction {0:.3e})")]
    NoRetrievablePopulation(f64),

    #[error("laser is resonant with excited level F'={0}")]
    Resonant(u32),

    #[error("unknown transition {0}")]
    UnknownTransition(String),

    #[error("optimizer did not converge after {} iterations (gradient norm {:.3e})", .0.iterations, .0.gradient_norm)]
    NonConvergence(Box<Diagnostics>),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
