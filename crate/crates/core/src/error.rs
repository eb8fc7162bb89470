use thiserror::Error;

/// Errors raised by the simulator and the classical-bound machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two states that were to be combined share a photon or basis label.
    #[error("label collision: {0}")]
    LabelCollision(String),

    /// Basis sets or matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A mathematical invariant (normalization, unitarity, completeness) is broken.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    /// An operation was handed input it is not defined for.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A joint state is not of the expected shape.
    #[error("unexpected state shape: {0}")]
    Shape(String),

    /// `I_par + I_perp == 0`.
    #[error("undefined ratio: no coincidences recorded")]
    UndefinedRatio,

    /// Count data is missing cells.
    #[error("incomplete data: {0}")]
    IncompleteData(String),

    /// The fringe fit could not be performed.
    #[error("fit failed: {0}")]
    FitFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
