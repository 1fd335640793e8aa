use std::path::{Path, PathBuf};

use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: ConfigError },
    #[error(transparent)]
    InlineConfig(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] pairdistill_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl From<pairdistill_core::AnnotationError> for HarnessError {
    fn from(e: pairdistill_core::AnnotationError) -> Self {
        HarnessError::Core(e.into())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_owned(), source }
}

pub(crate) fn format_err(path: &Path, message: impl Into<String>) -> HarnessError {
    HarnessError::Format { path: path.to_owned(), message: message.into() }
}
