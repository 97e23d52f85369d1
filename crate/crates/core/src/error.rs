use thiserror::Error;

/// Errors raised by the array operations and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlamError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index:?} out of range for dims {dims:?}")]
    IndexOutOfRange { index: Vec<usize>, dims: Vec<usize> },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {what} at cell {cell}")]
    NonFinite { what: &'static str, cell: usize },

    #[error("non-finite {0}")]
    NonFiniteScalar(&'static str),

    #[error("power iteration did not converge after {iterations} iterations")]
    PowerIteration { iterations: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("proximal gradient diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("line search failed after {steps} step reductions")]
    LineSearch { steps: usize },

    #[error("dense materialization needs {required} entries but the cap is {cap}")]
    MaterializationCap { required: usize, cap: usize },

    #[error("relative deviation undefined: reference objective is zero")]
    UndefinedRatio,

    #[error("held-out mask selects no cells")]
    EmptyMask,
}

pub type Result<T> = std::result::Result<T, GlamError>;
