use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid register dimensions: {0}")]
    InvalidDims(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {d} exceeds the exact-evolution cap of {max}")]
    SizeCap { d: usize, max: usize },

    #[error("matrix is not Hermitian (max |A - A^dag| = {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max |U^dag U - I| = {0:e})")]
    NotUnitary(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("state norm out of range: squared norm {0}")]
    InvalidNorm(f64),

    #[error("invalid oracle: {0}")]
    InvalidOracle(String),

    #[error("operation undefined for the null oracle (k = 0)")]
    NullOracle,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
