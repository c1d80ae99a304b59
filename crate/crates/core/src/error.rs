use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("eigenvalue iteration did not converge after {iterations} sweeps")]
    EigenNoConvergence { iterations: usize },

    #[error("invalid flow settings: {0}")]
    InvalidSpec(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is not a soliton at tolerance {tol:e}: {reason}")]
    NotSoliton { tol: f64, reason: String },

    #[error("invalid structure constants: {0}")]
    InvalidAlgebra(String),

    #[error("degenerate plane: Gram determinant {gram:e}")]
    DegeneratePlane { gram: f64 },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),
}
