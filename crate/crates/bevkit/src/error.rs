//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation precondition (bad argument, length
    /// mismatch, parameter out of range).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A polyline failed its structural invariants.
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),

    /// Least-squares fit is underdetermined because every dominant-axis
    /// coordinate coincides.
    #[error("degenerate fit: dominant-axis coordinates are all identical")]
    DegenerateFit,

    /// A mask could not be converted into a centerline (empty foreground or
    /// degenerate geometry). The instance is dropped, not patched over.
    #[error("decode failure: {0}")]
    DecodeFailure(String),

    /// Inconsistent configuration (grid, height bins, camera rig).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    MalformedJson(#[from] serde_json::Error),

    /// A scene field violates the schema. `pointer` is a JSON pointer to the
    /// offending value.
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    /// A topology edge references an id that does not exist in the scene.
    #[error("dangling id at {pointer}: edge ({edge_source} -> {edge_target}) references missing id {missing}")]
    DanglingId {
        pointer: String,
        edge_source: String,
        edge_target: String,
        missing: String,
    },

    #[error("bad tensor magic (expected \"BEVT\")")]
    BadMagic,

    #[error("unsupported tensor version {0}")]
    BadVersion(u8),

    #[error("unsupported tensor dtype {0}")]
    BadDtype(u8),

    #[error("truncated tensor file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("trailing data after tensor payload: {extra} extra bytes")]
    TrailingData { extra: usize },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
