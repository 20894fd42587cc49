use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty mask: no observed entries")]
    EmptyMask,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical underflow: {0}")]
    Underflow(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("input must be nonnegative on observed entries: {0}")]
    NegativeInput(String),

    #[error("rank mismatch: expected {expected}, detected {detected}")]
    RankMismatch { expected: usize, detected: usize },

    #[error("exhaustive search infeasible: C({n},{r}) = {count} exceeds limit {limit}")]
    SearchInfeasible {
        n: usize,
        r: usize,
        count: u128,
        limit: u128,
    },

    #[error("singular intersection submatrix")]
    SingularIntersection,

    #[error("degenerate volume posterior: non-positive variance {0}")]
    DegenerateVolume(f64),

    #[error("degenerate rate: intensity underflow with positive count at ({0}, {1})")]
    DegenerateRate(usize, usize),

    #[error("degenerate conditional variance for entry ({0}, {1}): no information")]
    DegenerateVariance(usize, usize),

    #[error("undefined similarity: {0}")]
    UndefinedSimilarity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
