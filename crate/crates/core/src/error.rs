use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// Every variant belongs to one [`ErrorClass`], which the command-line tool
/// maps onto its exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |R[{i}][{j}] - R[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("matrix is not positive definite: smallest eigenvalue {min_eigenvalue:e} <= tolerance {tolerance:e}")]
    NotPositiveDefinite { min_eigenvalue: f64, tolerance: f64 },
    #[error("diagonal entry {index} is not positive ({value})")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("need at least {required} realizations, got {got}")]
    InsufficientRealizations { required: usize, got: usize },
    #[error("sample variance at index {index} is not positive ({value})")]
    DegenerateVariance { index: usize, value: f64 },
    #[error("value {value} is outside [-1, 1]")]
    OutOfRange { value: f64 },
    #[error("givens position {position} invalid for dimension {dim}")]
    BadPosition { position: usize, dim: usize },
    #[error("entry ({i}, {j}) is not a contraction (|gamma| = {value})")]
    NotAContraction { i: usize, j: usize, value: f64 },
    #[error("index ({i}, {j}) invalid for size {n}")]
    IndexError { i: usize, j: usize, n: usize },
    #[error("dilation dimension {dim} invalid for matrix size {n}")]
    BadDim { dim: usize, n: usize },
    #[error("lag {lag} exceeds the truncation window of dimension {dim} (max lag {max})", max = dim - 1)]
    TruncationWindowExceeded { lag: usize, dim: usize },
    #[error("levinson recursion broke down at step {step}: prediction error {error:e}")]
    SingularStep { step: usize, error: f64 },
    #[error("rotation angle {angle} is too close to pi for a unique logarithm")]
    NearCutLocus { angle: f64 },
    #[error("matrix has determinant -1; expected the identity component")]
    WrongComponent,
    #[error("matrix is not orthogonal (max deviation {deviation:e})")]
    NotOrthogonal { deviation: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("vector is not tangent at the given point (skew residual {residual:e})")]
    NotTangent { residual: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("velocity vanishes on segment {segment} (norm {norm:e})")]
    VanishingVelocity { segment: usize, norm: f64 },
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("curve is not closed")]
    NotClosed,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Coarse grouping of errors, used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Degeneracy,
    WindowOrGrid,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            NotSquare { .. }
            | NotSymmetric { .. }
            | NotPositiveDefinite { .. }
            | NonPositiveDiagonal { .. }
            | InsufficientRealizations { .. }
            | OutOfRange { .. }
            | BadPosition { .. }
            | NotAContraction { .. }
            | NotOrthogonal { .. }
            | DimMismatch { .. }
            | NotTangent { .. }
            | NotClosed
            | InvalidArgument(_) => ErrorClass::Validation,
            DegenerateVariance { .. }
            | SingularStep { .. }
            | NearCutLocus { .. }
            | WrongComponent
            | VanishingVelocity { .. }
            | DegenerateCurve(_) => ErrorClass::Degeneracy,
            IndexError { .. }
            | BadDim { .. }
            | TruncationWindowExceeded { .. }
            | GridMismatch(_) => ErrorClass::WindowOrGrid,
            Io(_) | Parse(_) => ErrorClass::Io,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
