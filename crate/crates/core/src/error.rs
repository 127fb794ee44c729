use std::path::PathBuf;

use crate::dataset::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: missing column `{column}`", path.display())]
    MissingColumn { path: PathBuf, column: String },

    #[error("{}: row {row}, column `{column}`: {message}", path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("weather {location}/{year}: variable {variable} has {found} days, expected {expected}")]
    DayCount {
        location: String,
        year: i32,
        variable: String,
        found: usize,
        expected: usize,
    },

    #[error("duplicate weather entry for {0}")]
    DuplicateKey(String),

    #[error("unknown weather variable `{0}`")]
    UnknownVariable(String),

    #[error("validation failed with {} violation(s); first: {}", .0.violations.len(), .0.first_message())]
    Validation(Box<ValidationReport>),

    #[error("value `{value}` is not in the vocabulary of column `{column}`")]
    OutOfVocabulary { column: String, value: String },

    #[error("shape mismatch in {layer}: expected {expected}, got {actual}")]
    Shape {
        layer: String,
        expected: String,
        actual: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite training loss at step {step}: {loss}")]
    NonFiniteLoss { step: usize, loss: f64 },

    #[error("feature manifest mismatch: {0}")]
    ManifestMismatch(String),

    #[error("unknown feature group `{0}`")]
    UnknownGroup(String),

    #[error("malformed file {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

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

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn shape(
        layer: impl Into<String>,
        expected: impl std::fmt::Debug,
        actual: impl std::fmt::Debug,
    ) -> Self {
        Error::Shape {
            layer: layer.into(),
            expected: format!("{expected:?}"),
            actual: format!("{actual:?}"),
        }
    }
}
