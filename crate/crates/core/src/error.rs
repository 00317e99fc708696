use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Incompatible shapes (layer chaining, feature dimensions, ...).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Input outside the operation's domain (empty data, bad labels, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite values or a numerical procedure that failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An invalid transform specification.
    #[error("transform spec error: {0}")]
    Spec(String),

    /// An invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A parse failure, pointing at the offending file and line.
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    /// A failure in a per-source sub-fit, tagged with the source index.
    #[error("source {index}: {cause}")]
    Source {
        index: usize,
        #[source]
        cause: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the index of the source it originated from.
    pub fn for_source(index: usize, cause: Error) -> Self {
        Error::Source {
            index,
            cause: Box::new(cause),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
