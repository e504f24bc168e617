use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model or chain configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two inputs disagree on a dimension.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Malformed input file. Line and column are 1-based.
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// Every heir cluster has zero likelihood for a unit, or a mixture sum vanished.
    #[error("numerical error at unit {unit}{}: {message}", iteration.map(|t| format!(", iteration {t}")).unwrap_or_default())]
    Numerical {
        unit: usize,
        iteration: Option<usize>,
        message: String,
    },

    /// A chain for one candidate number of parents failed.
    #[error("K = {parents}: {source}")]
    Candidate {
        parents: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// The innermost error, looking through [`Error::Candidate`].
    pub fn root(&self) -> &Error {
        match self {
            Error::Candidate { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_iteration(self, t: usize) -> Self {
        match self {
            Error::Numerical { unit, message, .. } => Error::Numerical {
                unit,
                iteration: Some(t),
                message,
            },
            other => other,
        }
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
