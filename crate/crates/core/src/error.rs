use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("tensor shape must have at least one factor and no zero factors")]
    InvalidShape,

    #[error("shape mismatch: expected side {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("factor index {index} out of range for a shape with {factors} factors")]
    FactorOutOfRange { index: usize, factors: usize },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("eigendecomposition did not converge")]
    NoConvergence,

    #[error("support projection identity violated (deviation {deviation:e})")]
    AbsorptionFailed { deviation: f64 },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("matrix is not unitary (deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("effects do not form a projection-valued measure: {0}")]
    NotProjective(String),

    #[error("effects do not form a POVM: {0}")]
    NotPovm(String),

    #[error("not a density matrix: {0}")]
    NotDensity(String),

    #[error("not a channel: {0}")]
    NotChannel(String),

    #[error("linear map is singular or ill-conditioned (smallest singular value {smallest_singular_value:e})")]
    SingularMap { smallest_singular_value: f64 },

    #[error("marginal mismatch (deviation {deviation:e})")]
    MarginalMismatch { deviation: f64 },

    #[error("not a compatibilizer: {0}")]
    NotCompatibilizer(String),

    #[error("generalized Jordan operator constraint violated (deviation {deviation:e})")]
    InvalidJordanOperator { deviation: f64 },

    #[error("separable decomposition unavailable: {0}")]
    NotSeparable(String),

    #[error("problem exceeds solver size cap: {0}")]
    SizeCap(String),

    #[error("ill-posed SDP: {0}")]
    IllPosed(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
