use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: {dimension} value {value} outside {range}")]
    LabelRange {
        path: PathBuf,
        line: usize,
        dimension: &'static str,
        value: i64,
        range: &'static str,
    },

    #[error("{dimension} value {value} outside {range}")]
    ValueRange {
        dimension: &'static str,
        value: i64,
        range: &'static str,
    },

    #[error("duplicate id `{id}` (line {line})")]
    DuplicateId { id: String, line: usize },

    #[error("duplicate annotation cell (item `{item}`, annotator `{annotator}`) at line {line}")]
    DuplicateCell {
        item: String,
        annotator: String,
        line: usize,
    },

    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),

    /// A value, configuration field or argument violates its documented range.
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("pair `{0}` has no gold labels")]
    Unlabeled(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    /// A statistic is undefined for the supplied data.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for input/configuration problems (exit code 1); false for failures
    /// that happen while a valid job is running (exit code 2).
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteLoss { .. } | Error::Io { .. } | Error::Unlabeled(_)
        )
    }
}
