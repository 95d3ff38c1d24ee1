use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("agent index {index} out of range for {n} agents")]
    AgentOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("adjacency matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },

    #[error("adjacency diagonal must be zero, a[{index}][{index}] = {value}")]
    NonZeroDiagonal { index: usize, value: f64 },

    #[error("adjacency entry a[{row}][{col}] is not finite")]
    NonFiniteWeight { row: usize, col: usize },

    #[error("topology must contain at least one agent")]
    EmptyTopology,

    #[error("brute-force oracle supports at most {max} agents, got {n}")]
    OracleCapacity { n: usize, max: usize },

    #[error("non-finite {quantity} for agent {agent}: {value}")]
    NonFinite {
        quantity: &'static str,
        agent: usize,
        value: f64,
    },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
