use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid violation: {0}")]
    GridViolation(String),

    #[error("point-policy violation: {0}")]
    PolicyViolation(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid design space: {0}")]
    InvalidSpace(String),

    #[error("invalid prior model probabilities: {0}")]
    InvalidPriors(String),

    #[error("model definition error: {0}")]
    ModelDefinition(String),

    #[error("prior configuration error: {0}")]
    PriorConfiguration(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("undefined node: all class counts are zero")]
    UndefinedNode,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("label {label} outside 0..{k}")]
    InvalidLabel { label: usize, k: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset does not match the forest's training set: {0}")]
    DatasetMismatch(String),

    #[error("posterior oracle error: {0}")]
    Oracle(String),

    #[error("matrix is not a generator: {0}")]
    NotGenerator(String),

    #[error("posterior mode search did not converge: {0}")]
    Unconverged(String),

    #[error("impossible data: every model assigns zero evidence")]
    ImpossibleData,

    #[error("io error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
