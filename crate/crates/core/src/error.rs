use std::io;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("frame count mismatch: expected {expected}, got {actual}")]
    FrameCountMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid segment set: {0}")]
    InvalidSegments(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("bad magic: expected \"SYL2\", found {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("unexpected payload kind {found} (expected {expected})")]
    WrongKind { expected: u32, found: u32 },

    #[error("truncated header")]
    TruncatedHeader,

    #[error("truncated payload: expected {expected} bytes, read {actual}")]
    TruncatedPayload { expected: u64, actual: u64 },

    #[error("NaN or infinite value in payload at element {0}")]
    NonFinitePayload(u64),

    #[error("trailing bytes after payload")]
    TrailingBytes,

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
