use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("size limit exceeded: {0}")]
    Size(String),

    #[error("infeasible affine set: residual {residual:.3e} exceeds {bound:.3e}")]
    Infeasible { residual: f64, bound: f64 },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("unsupported graph process: {0}")]
    UnsupportedProcess(String),

    #[error("invalid step size: {0}")]
    InvalidStep(String),

    #[error("step-order violation at t={t}: alpha={alpha} exceeds h={h}")]
    StepOrder { t: u64, alpha: f64, h: f64 },

    #[error("degenerate row {row} at node {node}: zero norm")]
    DegenerateRow { node: usize, row: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("connectivity error: {0}")]
    Connectivity(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user-supplied configuration rather than a
    /// runtime failure. Drives the CLI exit code.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parameter(_)
                | Error::Parse { .. }
                | Error::Partition(_)
                | Error::InvalidStep(_)
        )
    }
}
