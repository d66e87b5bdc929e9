//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("shape mismatch in {op}: left is {left:?}, right is {right:?}")]
    Shape {
        op: String,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("dimension mismatch at layer {layer}, relation {relation}: {msg}")]
    Dimension {
        layer: usize,
        relation: usize,
        msg: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training aborted at epoch {epoch}: loss={loss}, max|grad|={max_grad}")]
    TrainingDiverged {
        epoch: usize,
        loss: f64,
        max_grad: f64,
    },

    #[error("archive error: {0}")]
    Archive(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
