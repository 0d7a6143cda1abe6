use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("mode {mode} out of range for a tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("index {index:?} out of range for shape {shape:?}")]
    IndexOutOfRange {
        index: Vec<usize>,
        shape: Vec<usize>,
    },

    #[error("invalid tensor ring: {0}")]
    InvalidRing(String),

    #[error("infeasible embedding: {0}")]
    InfeasiblePlan(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite values during the fit at rank level {ranks:?}")]
    NonFinite { ranks: Vec<usize> },

    #[error("patch size {patch}: {source}")]
    Patch {
        patch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate statistic: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
