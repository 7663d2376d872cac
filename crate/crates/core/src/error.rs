use thiserror::Error;

/// Errors produced by the privatization pipeline and its analysis tools.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("certification failed for plane {plane}: {detail}")]
    CertificationFailure { plane: String, detail: String },

    #[error("unsupported image: {0}")]
    UnsupportedImage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error: {0}")]
    Codec(#[from] ::image::ImageError),

    #[error("malformed report: {0}")]
    Report(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
