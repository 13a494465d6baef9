use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: String,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("unknown object type `{0}`")]
    UnknownType(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid sparse matrix: {0}")]
    Sparse(String),

    #[error("graph failed validation:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<crate::hin::Violation>),

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("model: {0}")]
    Model(String),

    #[error("label {label} out of range for type `{ty}` with {classes} classes")]
    LabelRange {
        ty: String,
        label: usize,
        classes: usize,
    },

    #[error("data: {0}")]
    Data(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(
        op: impl Into<String>,
        left: (usize, usize),
        right: (usize, usize),
    ) -> Self {
        Error::Shape {
            op: op.into(),
            left,
            right,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
