use thiserror::Error;

/// Errors raised by the ranking library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("table shape mismatch: expected {expected_docs}x{expected_len}, got {docs}x{len}")]
    Shape {
        expected_docs: usize,
        expected_len: usize,
        docs: usize,
        len: usize,
    },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("index {index} out of range for ranking with {len} items")]
    Index { index: usize, len: usize },

    #[error("slot {slot} must be >= 1")]
    SlotZero { slot: usize },

    #[error("exposure undefined at (s={slot}, l={len}) for budget K={slots}")]
    ExposureDomain { slot: usize, len: usize, slots: usize },

    #[error("exposure table: {0}")]
    ExposureTable(String),

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),

    #[error("no eligible placement remains")]
    NoEligiblePlacement,

    #[error("document {0} is not placed in the ranking")]
    DocNotPlaced(usize),

    #[error("instance too large for enumeration: bound {bound:.3e} exceeds ceiling {ceiling:.3e}")]
    TooLarge { bound: f64, ceiling: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
