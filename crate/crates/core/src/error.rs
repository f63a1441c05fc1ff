use thiserror::Error;

/// Errors raised anywhere in the filtering and partitioning pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("matrix is not symmetric: |a({row},{col}) - a({col},{row})| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix contains a non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not positive semidefinite: pivot {pivot:e} at index {index}")]
    NotPositiveSemidefinite { index: usize, pivot: f64 },

    #[error("eigensolver did not converge on a {dim}x{dim} matrix (residual {residual:e})")]
    NoConvergence { dim: usize, residual: f64 },

    #[error("invalid noise specification: {0}")]
    InvalidSpec(String),

    #[error("zero state and observation noise is not supported")]
    ZeroNoiseUnsupported,

    #[error("Lorenz 96 needs at least 4 state variables, got {0}")]
    DimensionTooSmall(usize),

    #[error("observation model does not factorize per state component: {0}")]
    NonFactorizableObservation(String),

    #[error("innovation covariance is singular")]
    SingularInnovationCovariance,

    #[error("all resampling weights are zero or NaN")]
    DegenerateWeights,

    #[error("invalid number of blocks K={k} for d_x={d_x}: {reason}")]
    InvalidK {
        k: usize,
        d_x: usize,
        reason: &'static str,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("state variable {0} has zero variance")]
    ZeroVariance(usize),

    #[error("vertex {0} is isolated (zero degree)")]
    IsolatedVertex(usize),

    #[error("infeasible cluster size constraints: K={k}, xi={xi}, zeta={zeta}, d_x={d_x}")]
    InfeasibleConstraints {
        k: usize,
        xi: usize,
        zeta: usize,
        d_x: usize,
    },

    #[error("flow network is infeasible: {0}")]
    Infeasible(String),

    #[error("malformed flow solution: {0}")]
    MalformedSolution(String),

    #[error("input is empty")]
    EmptyInput,

    #[error("partitions cover different index sets")]
    IndexSetMismatch,

    #[error("need at least 2 replicates, got {0}")]
    TooFewReplicates(usize),

    #[error("config parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config validation error in `{field}`: {message}")]
    ValidationError { field: String, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
