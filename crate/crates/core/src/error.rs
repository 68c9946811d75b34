use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum CoreError {
    #[error("malformed file {path}:{line}: {message}")]
    MalformedFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),

    #[error("empty geometry: {0}")]
    EmptyGeometry(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("mesh is not watertight ({boundary_edges} boundary edges, {nonmanifold_edges} non-manifold edges)")]
    NotWatertight {
        boundary_edges: usize,
        nonmanifold_edges: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("point shortage: needed {needed}, only {available} survive the crop")]
    Shortage { needed: usize, available: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("plane fit failed: {0}")]
    PlaneFit(String),

    #[error("no points above the table plane")]
    EmptyObject,

    #[error("joint {joint} out of limits: {value} not in [{lower}, {upper}]")]
    JointOutOfLimits {
        joint: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("hand base collision not resolvable within {max_retreat} m")]
    NoClearance { max_retreat: f64 },

    #[error("optimization diverged: {0}")]
    Diverged(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("pipeline stage '{stage}' failed for object '{object}': {message}")]
    Stage {
        stage: String,
        object: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
