use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("camera centers coincide, relative translation is undefined")]
    DegenerateBaseline,
    #[error("rotations are 180 degrees apart, midpoint is undefined")]
    AntipodalPair,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("search window size {upscale} * (1 + 2 * {border}) is not a whole number of cells")]
    NonIntegerWindow { upscale: usize, border: f64 },
    #[error("reference database is empty")]
    EmptyDatabase,
    #[error("rays are (near) parallel")]
    DegenerateRays,
    #[error("triangulated point lies behind a reference camera")]
    NegativeRange,
    #[error("at least two references are required, got {0}")]
    NotEnoughReferences(usize),
    #[error("every hypothesis was degenerate")]
    AllHypothesesDegenerate,
    #[error("mean direction of the samples vanishes")]
    DegenerateMean,
    #[error("scene contains no points")]
    EmptyScene,
    #[error("an image of the pair has no valid depth")]
    NoValidDepth,
    #[error("attempt budget exhausted after {} of {requested} pairs", .partial.len())]
    BudgetExhausted {
        requested: usize,
        partial: Vec<(usize, usize)>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown image id {0:?}")]
    UnknownImage(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
