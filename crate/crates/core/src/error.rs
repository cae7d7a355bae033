use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size error: {0}")]
    Size(String),

    #[error("generation error: invariant `{invariant}` unsatisfied after {attempts} attempts")]
    Generation { invariant: &'static str, attempts: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("synthesis error: could not build a clean row for label {label}")]
    Synthesis { label: u8 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error in `{block}`: {reason}")]
    Numeric { block: String, reason: String },

    #[error("stratification error: class {class} has {count} members, need at least {k}")]
    Stratification { class: u8, count: usize, k: usize },

    #[error("training error at epoch {epoch} (fold {fold}): {reason}")]
    Training { fold: usize, epoch: usize, reason: String },

    #[error("file error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {reason}")]
    Parse { context: String, reason: String },

    #[error("compatibility error: {0}")]
    Compatibility(String),

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(context: impl Into<String>, reason: impl ToString) -> Self {
        Error::Parse { context: context.into(), reason: reason.to_string() }
    }

    /// Short category name, used for single-line CLI error output.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Size(_) => "size",
            Error::Generation { .. } => "generation",
            Error::Shape(_) => "shape",
            Error::Synthesis { .. } => "synthesis",
            Error::EmptyInput(_) => "empty-input",
            Error::Domain(_) => "domain",
            Error::Numeric { .. } => "numeric",
            Error::Stratification { .. } => "stratification",
            Error::Training { .. } => "training",
            Error::Io { .. } => "file",
            Error::Parse { .. } => "parse",
            Error::Compatibility(_) => "compatibility",
            Error::Usage(_) => "usage",
        }
    }
}
