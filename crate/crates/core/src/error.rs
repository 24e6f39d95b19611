use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unstable lattice: |trace| = {trace_abs:.12} >= 2 (trace = {trace:.12})")]
    UnstableLattice { trace: f64, trace_abs: f64 },

    #[error("singular envelope at s = {s}: beta = {beta}")]
    SingularEnvelope { s: f64, beta: f64 },

    #[error("non-finite potential at node {node} (coordinates {coords:?}, t = {time})")]
    NonFinitePotential {
        node: usize,
        coords: [f64; 2],
        time: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
