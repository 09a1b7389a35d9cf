use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is invalid. `field` is a path such as `subsets[0]`.
    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },

    /// Operands have incompatible dimensions or violate a call contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The output covariance matrix is not positive definite.
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// The sample carries no usable variance (constant outputs).
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// `Tr(M Sigma)` is too close to zero for the index to be defined.
    #[error("ill-posed index: {0}")]
    IllPosed(String),

    #[error("unsupported oracle: {0}")]
    UnsupportedOracle(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Malformed tabular or matrix input.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("model evaluation failed: {0}")]
    Evaluation(String),

    #[error("non-finite value in report field `{0}`")]
    NonFinite(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
