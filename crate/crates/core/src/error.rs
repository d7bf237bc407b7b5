use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty factor list")]
    EmptyFactors,

    #[error("invalid dimension signature: {0}")]
    InvalidSignature(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("signature mismatch: {left:?} vs {right:?}")]
    SignatureMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("subsystem index {index} out of range for {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },

    #[error("index {index} out of range (length {len})")]
    InvalidIndex { index: usize, len: usize },

    #[error("ket norm {norm} deviates from 1 by more than {limit}")]
    NotNormalized { norm: f64, limit: f64 },

    #[error("not a basis: {found} vectors for dimension {dim}")]
    NotABasis { dim: usize, found: usize },

    #[error("basis is not orthonormal: max deviation {deviation:e} at {pair:?}")]
    NotOrthonormal {
        deviation: f64,
        pair: (usize, usize),
    },

    #[error("expected a bipartite signature, found {0} subsystems")]
    NotBipartite(usize),

    #[error("structural violation: {0}")]
    StructuralViolation(String),

    #[error("lambda index {lambda} is not in I_kappa for kappa {kappa}")]
    LambdaNotInIKappa { kappa: usize, lambda: usize },

    #[error("unsupported subsystem dimension {0}")]
    UnsupportedDimension(usize),

    #[error("invalid basis assignment: {0}")]
    InvalidAssignment(String),

    #[error("matrix is not unitary (deviation {0:e})")]
    NonUnitary(f64),

    #[error("vector is not mutually unbiased to basis {basis} (vector {vector}, deviation {deviation:e})")]
    NotMutuallyUnbiased {
        basis: usize,
        vector: usize,
        deviation: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty pool of complement bases")]
    EmptyPool,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
