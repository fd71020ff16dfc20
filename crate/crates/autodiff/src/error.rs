use thiserror::Error;

#[derive(Error, Debug)]
pub enum AdError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    DimError { op: &'static str, msg: String },

    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },

    #[error("backward requires a scalar loss, got {numel} elements")]
    NonScalarLoss { numel: usize },

    #[error("backward was already invoked on this tape")]
    BackwardConsumed,

    #[error("{op}: degenerate batch statistics ({n} value(s) per channel)")]
    DegenerateStats { op: &'static str, n: usize },
}

pub type Result<T> = std::result::Result<T, AdError>;
