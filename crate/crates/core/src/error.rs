use thiserror::Error;

use crate::sdp::SolveStatus;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A maximally coherent resource of rank one carries no coherence.
    #[error("resource rank m = {0} is outside the supported domain m >= 2")]
    TrivialResource(usize),

    #[error("malformed SDP: {0}")]
    MalformedProblem(String),

    #[error("missing assignment for variable `{0}`")]
    MissingVariable(String),

    #[error("SDP solve did not reach optimality (status {status:?}, {detail})")]
    Solver { status: SolveStatus, detail: String },

    #[error("requested protocol is infeasible: {0}")]
    Infeasible(String),

    #[error("malformed protocol: {0}")]
    MalformedProtocol(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
