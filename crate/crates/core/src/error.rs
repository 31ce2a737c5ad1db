use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("incomparable masks: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("mask has no set pixels")]
    EmptyRegion,

    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },

    #[error("unknown class label {label:?} in image {image:?}")]
    UnknownClass { label: String, image: String },

    #[error("unsupported region shape {shape:?} in image {image:?}")]
    UnsupportedShape { shape: String, image: String },

    #[error("invalid annotation in image {image:?}: {reason}")]
    InvalidAnnotation { image: String, reason: String },

    #[error("duplicate image id {0:?}")]
    DuplicateImage(String),

    #[error("invalid prediction record at index {index}: {reason}")]
    InvalidPrediction { index: usize, reason: String },

    #[error("invalid RLE: {0}")]
    InvalidRle(String),

    #[error("detection references unknown image id {0:?}")]
    UnknownImage(String),

    #[error("detection {index} has no mask for mask IoU")]
    MissingMask { index: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid PGM: {0}")]
    Pgm(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
