use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("operators live on different grids")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (defect {defect:e} > tolerance {tolerance:e})")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("ground state has zero norm")]
    DegenerateNormalization,

    #[error("no deformed Hamiltonian candidate matches the target (best residual {best:e})")]
    NoMatch { best: f64 },

    #[error("{count} distinct deformed Hamiltonian candidates match the target")]
    Ambiguous { count: usize },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("cannot parse function `{0}`")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
