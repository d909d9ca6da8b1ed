use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not an ACTV1 file")]
    BadMagic,

    #[error("unsupported ACTV version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload, expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("non-finite value at ({problem},{layer},{position},{dim})")]
    NonFinite {
        problem: usize,
        layer: usize,
        position: usize,
        dim: usize,
    },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("invalid activation set: {0}")]
    InvalidSet(String),

    /// A sink failed part-way through a write.
    #[error("write failed at byte offset {offset}: {source}")]
    PartialWrite {
        offset: u64,
        #[source]
        source: io::Error,
    },

    #[error("layer {layer} not present; available layers: {available:?}")]
    MissingLayer { layer: u32, available: Vec<u32> },

    #[error("position {position} not present; available positions: {available:?}")]
    MissingPosition { position: i32, available: Vec<i32> },

    #[error("labels missing for problems: {0:?}")]
    MissingLabels(Vec<String>),

    #[error("rank correlation undefined for constant input")]
    ConstantInput,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient points: {0}")]
    InsufficientPoints(String),

    #[error("degenerate: all performances at ceiling")]
    AllAtCeiling,

    #[error("probe has no direction")]
    NoDirection,

    #[error("no residual variance")]
    NoResidualVariance,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{0}")]
    Missing(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}
