use thiserror::Error;

/// Errors produced by the lattice, evolution and state engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PstError {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error(
        "invalid reference axis: dims {dims:?} have B = 1 but another axis has more than one mode"
    )]
    InvalidReferenceAxis { dims: [usize; 3] },

    #[error("site {site:?} out of range for dims {dims:?}")]
    Index { site: [usize; 3], dims: [usize; 3] },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("eigensolver failed to converge (residual off-diagonal norm {residual:e})")]
    NumericalFailure { residual: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid coefficient: |alpha| = {0} exceeds 1")]
    InvalidCoefficient(f64),

    #[error("resource limit: {what} needs {required}, limit is {limit}")]
    Resource {
        what: String,
        required: f64,
        limit: f64,
    },

    #[error("weak-coupling violation on axis {axis} gap {gap}: J = {coupling} >= gamma = {gamma}")]
    WeakCouplingViolation {
        axis: usize,
        gap: usize,
        coupling: f64,
        gamma: f64,
    },
}

pub type Result<T> = std::result::Result<T, PstError>;
