use thiserror::Error;

use crate::augment::AugmentError;
use crate::cli::ConfigError;
use crate::corpus::CorpusError;
use crate::metrics::MetricsError;
use crate::model::ModelError;
use crate::projection::ProjectionError;
use crate::translate::TranslateError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Backend,
    Internal,
}

impl ErrorCategory {
    /// Process exit code documented in `xlproject --help`.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Backend => 4,
            ErrorCategory::Internal => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Unreadable or unwritable files and other input problems outside the
    /// corpus formats.
    #[error("{0}")]
    Data(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Corpus(e) => e.category(),
            Error::Projection(e) => e.category(),
            Error::Translate(e) => e.category(),
            Error::Augment(e) => e.category(),
            Error::Model(e) => e.category(),
            Error::Metrics(_) => ErrorCategory::Data,
            Error::Config(_) => ErrorCategory::Config,
            Error::Data(_) => ErrorCategory::Data,
        }
    }
}
