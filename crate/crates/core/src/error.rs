use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library reports. Numerical failures carry the value
/// that tripped the check so callers can log it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator dimension must be at least 1")]
    EmptyOperator,

    #[error("operator has a non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("operator is not Hermitian: max |A_jk - conj(A_kj)| = {deviation:e} exceeds {tolerance:e}")]
    NonHermitianInput { deviation: f64, tolerance: f64 },

    #[error("operator is not unitary: ||U^dag U - I|| = {deviation:e} exceeds {tolerance:e}")]
    NonUnitary { deviation: f64, tolerance: f64 },

    #[error("eigen-solver did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("band selection is empty")]
    EmptyBand,

    #[error("invalid band selection: {0}")]
    InvalidBand(String),

    #[error("spectral gap collapsed at s = {s}: gap {gap:e} <= floor {floor:e}")]
    GapCollapse { s: f64, gap: f64, floor: f64 },

    #[error("band tracking lost continuity between s = {from} and s = {to} (overlap {overlap:.4}, rank {rank})")]
    BandDiscontinuity { from: f64, to: f64, overlap: f64, rank: usize },

    #[error("reduced operator (H - z) restricted to the complement is singular at z = {re} + {im}i")]
    SingularReducedOperator { re: f64, im: f64 },

    #[error("contour passes within {margin:e} of the spectrum (floor {floor:e})")]
    ContourTooClose { margin: f64, floor: f64 },

    #[error("contour needs at least 16 nodes, got {0}")]
    TooFewContourNodes(usize),

    #[error("k(0) = {k0:e}, k(1) = {k1:e}: the coupling schedule must vanish at both endpoints")]
    EndpointViolation { k0: f64, k1: f64 },

    #[error("n = {n} exceeds the maximum {max} for the {representation} representation")]
    DimensionTooLarge { n: u32, max: u32, representation: &'static str },

    #[error("adaptive schedule failed to normalise: |f(1) - 1| = {deviation:e}")]
    NormalizationFailure { deviation: f64 },

    #[error("gap function is not strictly positive at u = {u}: g = {value:e}")]
    NonPositiveGap { u: f64, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("propagator failed to self-converge within {max_steps} steps (last change {change:e})")]
    StepLimitExceeded { max_steps: usize, change: f64 },

    #[error("time grids or time scales of the two traces do not match")]
    GridMismatch,

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("quadrature refinement disagrees by {relative:e} (relative)")]
    QuadratureNotConverged { relative: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("scaling fit needs at least {required} points, got {found}")]
    InsufficientPoints { required: usize, found: usize },

    #[error("scaling fit requires positive values, found {value} in column `{column}`")]
    NonPositiveValue { column: String, value: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
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
