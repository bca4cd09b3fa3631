use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TadaError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("node id {0} never appears in the edge list (ids must be dense and 0-based)")]
    NodeGap(usize),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node id {id} out of range for {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },

    #[error("Jacobi eigensolver did not converge after {0} sweeps")]
    NotConverged(usize),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("graph is bipartite")]
    Bipartite,

    #[error("input too large for dense oracle: n = {n} exceeds {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("loss became non-finite at epoch {epoch}")]
    NanLoss { epoch: usize },

    #[error("empty {0} split")]
    EmptySplit(&'static str),
}

pub type Result<T, E = TadaError> = std::result::Result<T, E>;

impl TadaError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        TadaError::InvalidParameter(msg.into())
    }
}
