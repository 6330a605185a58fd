use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("graph file line {line}: {msg}")]
    GraphParse { line: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("qubit index {index} invalid for a {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("operator is not Hermitian (max |M - M^dag| = {0:e})")]
    NotHermitian(f64),

    #[error("brute-force budget exceeded: {needed:e} tables > budget {budget:e}")]
    BudgetExceeded { needed: f64, budget: f64 },

    #[error("invalid Pauli string {0:?}")]
    InvalidPauli(String),

    #[error("invalid measurement layer: {0}")]
    InvalidLayer(String),

    #[error("wrong operator kind: expected {expected}, got {got}")]
    WrongKind { expected: &'static str, got: &'static str },

    #[error("energy is not finite")]
    NonFinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
