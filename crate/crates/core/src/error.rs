use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadratic form is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),

    #[error("quadratic form is not positive definite (leading minor {0} is not positive)")]
    NotPositiveDefinite(usize),

    #[error("quadratic form has odd diagonal entry Z[{0}][{0}]; only even forms are supported")]
    OddDiagonal(usize),

    #[error("flat entry list of length {0} is not a square matrix")]
    NotSquare(usize),

    #[error("level k must be at least 1")]
    ZeroLevel,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The lattice search could not certify the hull faces. This is an
    /// internal failure, not a user error.
    #[error("lattice window exhausted while certifying hull faces: {0}")]
    WindowExhausted(String),

    #[error("point is not a vertex of the subdivision: {0}")]
    NotAVertex(String),

    #[error("local chart at vertex {0} is not simplicial and unimodular")]
    UnsupportedChart(String),

    #[error("|Im w_{index}| = {value} exceeds the certified band {bound}; build a context with a larger im_w_bound")]
    OutsideImBand { index: usize, value: f64, bound: f64 },

    #[error("Fubini-Study form is not positive definite at w = {0}; truncation too coarse or t too close to the boundary")]
    NotPositiveDefiniteMetric(String),

    #[error("generator {0} is singular")]
    SingularGenerator(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
