use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unknown label {0}")]
    Label(i64),

    #[error("incompatible view: {0}")]
    View(String),

    #[error(transparent)]
    Annotation(#[from] AnnotationError),
}

/// Failures of the LMM annotation path. The engine downgrades these to a
/// skipped iteration instead of aborting the run.
#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("transport failure: {0}")]
    Transport(String),

    #[error("request timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("malformed answer for question {index}")]
    Parse { index: usize },

    #[error("no recorded response for image {checksum}")]
    Unrecorded { checksum: String },

    #[error("image encoding failed: {0}")]
    Encode(String),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape { expected, got });
    }
    Ok(())
}
