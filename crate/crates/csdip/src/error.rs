//! Crate-wide error type.
//!
//! Numeric code fails in a small number of ways: shapes that do not line up,
//! arguments outside a documented precondition, non-finite values escaping a
//! primitive, or plain I/O trouble. Each variant carries the operation name
//! and enough detail to identify the offending dimension or value.

use std::fmt;

/// Errors produced by this crate.
#[derive(Debug)]
pub enum Error {
    /// Tensor or matrix shapes incompatible with the requested operation.
    ShapeMismatch { op: &'static str, detail: String },
    /// An argument violates a documented precondition.
    InvalidArgument { op: &'static str, detail: String },
    /// A primitive produced (or received) a NaN or infinity.
    NonFinite { op: &'static str, detail: String },
    /// Every solver restart aborted (all hit non-finite values).
    AllRestartsFailed { detail: String },
    /// Underlying I/O failure.
    Io(std::io::Error),
    /// Malformed JSON header or config.
    Json(serde_json::Error),
    /// Image decoding/encoding failure.
    Image(image::ImageError),
    /// A container or config file is structurally wrong.
    Format { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, detail } => write!(f, "{op}: shape mismatch: {detail}"),
            Error::InvalidArgument { op, detail } => write!(f, "{op}: invalid argument: {detail}"),
            Error::NonFinite { op, detail } => write!(f, "{op}: non-finite value: {detail}"),
            Error::AllRestartsFailed { detail } => write!(f, "all restarts failed: {detail}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
            Error::Image(e) => write!(f, "image error: {e}"),
            Error::Format { detail } => write!(f, "format error: {detail}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            Error::Image(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Image(e)
    }
}

/// Shorthand constructors used throughout the crate.
impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch { op, detail: detail.into() }
    }

    pub(crate) fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument { op, detail: detail.into() }
    }

    pub(crate) fn non_finite(op: &'static str, detail: impl Into<String>) -> Self {
        Error::NonFinite { op, detail: detail.into() }
    }

    pub(crate) fn format(detail: impl Into<String>) -> Self {
        Error::Format { detail: detail.into() }
    }
}
