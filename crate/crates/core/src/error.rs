use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("compact storage requested for a directed tensor")]
    CompactOnDirected,
    #[error("compact storage requires a zero diagonal (slice {slice}, node {node})")]
    NonzeroDiagonal { slice: usize, node: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("slice {slice} is not symmetric at ({row}, {col})")]
    AsymmetricSlice {
        slice: usize,
        row: usize,
        col: usize,
    },
    #[error("non-finite value in slice {slice} at ({row}, {col})")]
    NonFinite {
        slice: usize,
        row: usize,
        col: usize,
    },
    #[error("threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),
    #[error("invalid Schatten order {0:?}; expected 1, 2 or inf")]
    InvalidOrder(String),
    #[error("k = {k} is outside 1..={max}")]
    InvalidK { k: usize, max: usize },
    #[error("at least two slices are required, got {0}")]
    InvalidT(usize),
    #[error("weight sets cover {left} and {right} slices")]
    SizeMismatch { left: usize, right: usize },
    #[error("invalid weight entry ({i}, {j}, {weight})")]
    InvalidWeight { i: usize, j: usize, weight: f64 },
    #[error("fusion weight set is empty")]
    EmptyWeights,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("ADMM iterate became non-finite at iteration {iteration}")]
    NonFiniteIterate { iteration: usize },
    #[error("no point on the path has {k} or fewer clusters")]
    KNeverReached { k: usize },
    #[error("graphon value {value} at ({x}, {y}) is outside [0, 1]")]
    InvalidGraphon { x: f64, y: f64, value: f64 },
    #[error("invalid block model: {0}")]
    InvalidBlockModel(String),
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("label vectors have lengths {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{}:{line}: {message}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}:{line}: node id {node} out of range for p = {p}", file.display())]
    NodeIdOutOfRange {
        file: PathBuf,
        line: usize,
        node: usize,
        p: usize,
    },
    #[error("{}: conflicting weights for edge ({u}, {v}) in undirected graph", file.display())]
    Asymmetry { file: PathBuf, u: usize, v: usize },
    #[error("invalid manifest {}: {message}", file.display())]
    Manifest { file: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
