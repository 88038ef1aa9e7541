use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("entries sum to {sum}, which is not within tolerance of 1")]
    SumOutOfRange { sum: f64 },
    #[error("entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },
    #[error("entry {index} is not a finite number")]
    NonFinite { index: usize },
    #[error("an allocation needs at least two alternatives, got {m}")]
    TooFewAlternatives { m: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("a profile needs at least one voter")]
    EmptyProfile,
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("unknown phantom system `{0}`")]
    UnknownSystem(String),
    #[error("invalid phantom system: {0}")]
    InvalidSystem(String),
    #[error("medians sum to {sum} at t = 1, normalization is unreachable")]
    NotNormalizable { sum: f64 },
    #[error("threshold {0} is outside [1/2, 1)")]
    InvalidThreshold(f64),
    #[error("phantom system `{0}` is not slow")]
    NotSlow(String),
    #[error("operation is only defined for m = 3, got m = {m}")]
    UnsupportedDimension { m: usize },
    #[error("dimension constraint violated: {0}")]
    DimensionConstraint(String),
    #[error("unknown mechanism `{0}`")]
    UnknownMechanism(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
