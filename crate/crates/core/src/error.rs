use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration file could not be parsed.
    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A value is outside its permitted range.
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    /// Two inputs that must agree in size do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    /// Not enough (or the wrong kind of) data for a fitting operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A model was used before being trained.
    #[error("model is untrained")]
    Untrained,

    /// A required model file does not exist.
    #[error("model file {} not found", .0.display())]
    MissingModel(PathBuf),

    /// A model file is malformed or of an unsupported version.
    #[error("model format error: {0}")]
    ModelFormat(String),

    /// A statistic is mathematically undefined for the given inputs.
    #[error("undefined statistic: {0}")]
    Undefined(String),

    /// Malformed record in a line-oriented input file.
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Problem with a frame directory.
    #[error("frame input error: {0}")]
    Frames(String),

    #[error("image error in {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
