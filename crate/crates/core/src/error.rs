use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("parameter outside Θ: {0}")]
    OutsideParameterSpace(String),

    #[error("singular model at boundary parameter: {0}")]
    SingularModel(String),

    #[error("columns are not orthonormal (Gram residual {residual:e})")]
    NotOrthonormal { residual: f64 },

    #[error("invalid probability: {0}")]
    InvalidProbability(String),

    #[error("not enough copies: {0}")]
    InsufficientCopies(String),

    #[error("maximally mixed state has a single eigenvalue; spectral gap undefined")]
    DegenerateModel,

    #[error("lemma hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
