use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Training produced a non-finite or exploding batch loss.
    #[error("training diverged at outer iteration {outer}, inner step {inner}: loss = {loss}")]
    Divergence {
        outer: usize,
        inner: usize,
        loss: f64,
    },

    #[error("{}: byte offset {offset}: {message}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    /// Every query had zero relevant database items.
    #[error("mAP is undefined: no query has a relevant database item")]
    UndefinedMetric,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
