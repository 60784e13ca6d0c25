use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero vector cannot be hashed or compared by angle")]
    ZeroVector,

    #[error("vector set is empty")]
    EmptySet,

    #[error("collection contains no vector sets")]
    EmptyCollection,

    #[error("query set is empty")]
    EmptyQuery,

    #[error("input sequence is empty")]
    EmptyInput,

    #[error("value {value} outside [0, 1]")]
    ValueOutOfRange { value: f64 },

    #[error("hash code {code} out of range 0..{range}")]
    CodeOutOfRange { code: u32, range: usize },

    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("too few samples: {samples} samples for {k} clusters")]
    TooFewSamples { samples: usize, k: usize },

    #[error("i/o error")]
    Io(#[from] io::Error),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("file truncated")]
    TruncatedFile,

    #[error("corrupt sketch: {0}")]
    CorruptSketch(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::DomainViolation(msg.into())
    }
}
