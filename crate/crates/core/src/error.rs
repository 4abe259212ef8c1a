use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing model file: {0}")]
    MissingFile(PathBuf),

    #[error("truncated stream in {file}: {detail}")]
    Truncated { file: String, detail: String },

    #[error("unknown camera model: {0}")]
    UnknownCameraModel(String),

    #[error("dangling reference: {0}")]
    DanglingReference(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-positive depth {0}")]
    NonPositiveDepth(f64),

    #[error("undistortion did not converge after {0} iterations")]
    UndistortionDiverged(usize),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("image {0} is not registered")]
    UnregisteredImage(u32),

    #[error("image {0} has no usable 3D observations")]
    NoObservations(u32),

    #[error("too few correspondences: {found} (need {needed})")]
    TooFewCorrespondences { found: usize, needed: usize },

    #[error("no hypothesis reached {needed} inliers (best {best})")]
    NoConsensus { best: usize, needed: usize },

    #[error("fitted scale {0} is not positive")]
    NonPositiveScale(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mask selects no usable pixels")]
    EmptyMask,

    #[error("missing metadata for image {0}")]
    MissingMetadata(u32),

    #[error("missing score for pair ({0}, {1})")]
    MissingScore(u32, u32),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
