use thiserror::Error;

use crate::model::PhasePoint;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model evaluation produced a non-finite value at {point}: {what}")]
    ModelEvaluation { point: PhasePoint, what: String },

    #[error("covariance is numerically singular ({0})")]
    Conditioning(String),

    #[error("unsupported derivative order {0} (at most 2 is implemented)")]
    UnsupportedOrder(u32),

    #[error("unsupported dimension d={dim}: {what}")]
    UnsupportedDimension { dim: usize, what: String },

    #[error("innovation density unavailable for base distribution `{0}`")]
    UnsupportedDistribution(String),

    #[error("quadrature did not converge at series order {order}: defect {defect:.3e} above tolerance {tolerance:.3e}")]
    QuadratureDivergence { order: usize, defect: f64, tolerance: f64 },

    #[error("characteristic-function inversion failed quality check: {0}")]
    InversionQuality(String),

    #[error("reference density unavailable: {0}")]
    ReferenceUnavailable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
