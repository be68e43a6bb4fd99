use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown problem `{0}` (expected one of: cantilever, mbb, custom)")]
    UnknownProblem(String),

    #[error("load applied to fixed DOF {dof}")]
    LoadOnFixedDof { dof: usize },

    #[error("singular stiffness matrix: zero pivot at DOF {dof} (node {node}, {axis}); the supports do not remove all rigid-body modes")]
    SingularSystem { dof: usize, node: usize, axis: char },

    #[error("length mismatch: expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("volume fraction {target} unreachable: achievable range is [{min}, {max}]")]
    VolumeUnreachable { target: f64, min: f64, max: f64 },

    #[error("bisection for {what} failed to bracket the target")]
    Bisection { what: &'static str },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
