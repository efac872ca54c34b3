use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("data length {len} does not match dims {dims:?} (expected {expected})")]
    DataLength {
        dims: Vec<usize>,
        len: usize,
        expected: usize,
    },
    #[error("zero-sized mode in dims {0:?}")]
    ZeroDim(Vec<usize>),
    #[error("mode {mode} out of range for a tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mode groups overlap at mode {0}")]
    OverlappingGroups(usize),
    #[error("expected an order-4 cubical tensor with side n >= 2, got dims {0:?}")]
    WrongShape(Vec<usize>),
    #[error("n = {n} is outside the supported range {}", range_text(*.min, *.max))]
    NOutOfRange { n: usize, min: usize, max: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),
    #[error("{0}")]
    Precondition(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn range_text(min: usize, max: usize) -> String {
    if max == usize::MAX {
        format!("n >= {min}")
    } else {
        format!("{min}..={max}")
    }
}
