use thiserror::Error;

/// Errors raised by construction, restriction, and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("exponent p must satisfy p > 2, got {0}")]
    InvalidExponent(f64),

    #[error("weight outside (0,1]: {0}")]
    InvalidWeight(String),

    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("capacity exceeded: {what} needs {needed}, limit is {limit}")]
    Capacity {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("non-finite intermediate value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("family is not admissible: {0}")]
    NotAdmissible(String),

    #[error("undecidable query: {0}")]
    Undecidable(String),

    #[error("zero vector has no distortion ratio")]
    ZeroVector,

    /// Block points land in cells shared with other atoms; the support has
    /// to be expanded before this restriction can be represented.
    #[error("block cannot stay compressed: {0}")]
    BlockCollision(String),
}

impl Error {
    /// True for errors caused by an explicit enumeration or size cap.
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
