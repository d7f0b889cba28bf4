use std::path::PathBuf;

/// Errors produced by the camlink library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("image {width}x{height} is smaller than the required {min_width}x{min_height}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },

    #[error("cannot decompose {width}x{height} grid into {levels} wavelet levels")]
    InvalidDecomposition {
        width: usize,
        height: usize,
        levels: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot estimate a fingerprint from an empty group")]
    EmptyGroup,

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("correlation is undefined for a constant grid")]
    UndefinedCorrelation,

    #[error("corrupt fingerprint file: {0}")]
    CorruptFingerprintFile(String),

    #[error("need at least 2 usable images, got {0}")]
    NotEnoughImages(usize),

    #[error("unknown account: {0}")]
    UnknownAccount(String),

    #[error("nothing to evaluate")]
    EmptyEvaluation,

    #[error("ROC needs at least one positive and one negative pair")]
    DegenerateRoc,

    #[error("dataset generation failed: {0}")]
    GenerationError(String),

    #[error("corrupt score matrix: {0}")]
    CorruptScoreMatrix(String),

    #[error("corrupt manifest: {0}")]
    CorruptManifest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),

    #[error("json: {0}")]
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
}
