use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice must have at least one row and one column (got {rows}x{cols})")]
    EmptyLattice { rows: usize, cols: usize },

    #[error("transverse field must be finite and non-negative (got {0})")]
    InvalidField(f64),

    #[error("Pauli string has {got} symbols but the system has {expected} qubits")]
    PauliLength { expected: usize, got: usize },

    #[error("non-finite Pauli coefficient {0}")]
    NonFiniteCoefficient(f64),

    #[error("merged Pauli coefficient has imaginary part {0:e}; operator is not Hermitian")]
    NonHermitian(f64),

    #[error("qubit count mismatch: expected {expected}, got {got}")]
    QubitMismatch { expected: usize, got: usize },

    #[error("{n} qubits exceeds the limit of {limit} for this operation")]
    TooManyQubits { n: usize, limit: usize },

    #[error("gate targets qubit {qubit} but the circuit has {n_qubits} qubits")]
    InvalidTarget { qubit: usize, n_qubits: usize },

    #[error("CNOT control and target coincide on qubit {0}")]
    DegenerateCnot(usize),

    #[error("parameter index {index} is used by more than one gate")]
    SharedParameter { index: usize },

    #[error("parameter index {index} out of range for {n_params} parameters")]
    ParameterIndex { index: usize, n_params: usize },

    #[error("expected {expected} parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },

    #[error("circuit depth must be at least 1")]
    ZeroDepth,

    #[error("bitstring has {got} bits, expected {expected}")]
    BitLength { expected: usize, got: usize },

    #[error("invalid bitstring {0:?}")]
    BadBitString(String),

    #[error("batch size must be at least {min} (got {got})")]
    BatchTooSmall { min: usize, got: usize },

    #[error("sample batch is empty")]
    EmptyBatch,

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("could not parse circuit text at line {line}: {msg}")]
    CircuitText { line: usize, msg: String },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
