use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: deviation {deviation:.3e} exceeds {bound:.3e}")]
    NotHermitian { deviation: f64, bound: f64 },

    #[error("matrix is not unitary: deviation {deviation:.3e} exceeds {bound:.3e}")]
    NotUnitary { deviation: f64, bound: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite entry encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("ambiguous band assignment at grid index {index} (band {band}): best {best:.4} vs runner-up {second:.4}")]
    AmbiguousAssignment {
        index: usize,
        band: usize,
        best: f64,
        second: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear algebra failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
