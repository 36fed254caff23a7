//! Error type shared by every module in the crate.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic {found:?}, expected \"FXT1\"")]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("{path}: truncated payload, expected {expected} bytes, got {got}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value encountered: {context}")]
    NonFinite { context: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("zero-norm vector: {context}")]
    ZeroNorm { context: String },

    #[error("degenerate cluster {cluster}: {context}")]
    DegenerateCluster { cluster: usize, context: String },

    #[error("empty input: {context}")]
    EmptyInput { context: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: invalid annotation: {reason}")]
    InvalidAnnotation { path: PathBuf, reason: String },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("could not place {n_faces} faces in a {width}x{height} image after {attempts} attempts; try a larger image")]
    Placement {
        n_faces: usize,
        height: usize,
        width: usize,
        attempts: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
