use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not antisymmetric (max |m + mᵀ| = {asymmetry:e})")]
    NotAntisymmetric { asymmetry: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The virtual control vector vanished, so the intermediate attitude is undefined.
    #[error("virtual control vector is degenerate (‖u‖ = {norm:e})")]
    DegenerateDirection { norm: f64 },

    /// `atan2(0, 0)`: the offset sits on the parent's instantaneous centre of rotation.
    #[error("singular formation task: offset ({x_bar}, {y_bar}) with v = {v}, omega = {omega}")]
    SingularTask {
        x_bar: f64,
        y_bar: f64,
        v: f64,
        omega: f64,
    },

    #[error("configuration violates the non-holonomic constraint (lateral speed {lateral:e})")]
    InfeasibleConfiguration { lateral: f64 },

    #[error("topology error at node {node}: {reason}")]
    Topology { node: usize, reason: String },

    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    /// Degenerate direction hit at run time with the hold strategy disabled.
    #[error("run aborted at step {step} (t = {time}): {source}")]
    RuntimeAbort {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
