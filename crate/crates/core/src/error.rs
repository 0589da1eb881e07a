use thiserror::Error;

/// Errors raised by the matrix calculus, the bottleneck engines and the
/// experiment pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("matrix is not Hermitian (residual {0:e})")]
    NotHermitian(f64),

    #[error("matrix contains non-finite entries")]
    NonFiniteEntries,

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("Jacobi eigen iteration did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    EigenNoConvergence { sweeps: usize, residual: f64 },

    #[error("matrix exponential overflow: eigenvalue {0} exceeds 700")]
    ExpOverflow(f64),

    #[error("non-finite update exponent for x = {x}")]
    NonFiniteExponent { x: usize },

    #[error("gamma ratio undefined: channel divergence {0:e} is below 1e-12")]
    UndefinedRatio(f64),

    #[error("vanishing projector overlap {overlap:e} for x = {x}")]
    VanishingOverlap { x: usize, overlap: f64 },

    #[error("enumeration of {maps} maps exceeds the limit of 1e7; use random sampling instead")]
    EnumerationTooLarge { maps: f64 },

    #[error("singular linear system; increase the ridge parameter (currently {ridge})")]
    SingularSystem { ridge: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("internal check failed: {0}")]
    Internal(String),
}

impl Error {
    /// True for failures of the numerics themselves, as opposed to malformed
    /// inputs or parameters.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNoConvergence { .. }
                | Error::ExpOverflow(_)
                | Error::NonFiniteExponent { .. }
                | Error::UndefinedRatio(_)
                | Error::VanishingOverlap { .. }
                | Error::SingularSystem { .. }
                | Error::Internal(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
