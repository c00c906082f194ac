use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by parsing, evaluation and the verification checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {position}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        position: usize,
        expected: Vec<String>,
        found: String,
    },

    #[error("unknown symbol `{name}` at byte {position}")]
    UnknownSymbol { name: String, position: usize },

    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular metric: det = {det:e} at {point:?}")]
    SingularMetric { det: f64, point: Vec<f64> },

    #[error("sampling exhausted: accepted {accepted} of {requested} requested after {drawn} draws")]
    Exhausted {
        accepted: usize,
        requested: usize,
        drawn: usize,
    },

    #[error("bad mu matrix: {0}")]
    BadMu(String),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("field `{field}` is not diagonal: component ({row}, {col}) is nonzero")]
    NotDiagonal {
        field: String,
        row: usize,
        col: usize,
    },

    #[error("matrix is not semisimple; clustered eigenvalues {cluster:?}")]
    NonSemisimple { cluster: Vec<Complex64> },

    #[error("complex characteristic speeds at {point:?}")]
    ComplexCharacteristics { point: Vec<f64> },

    #[error("eigenvalue collision (gap {gap:e}) at {point:?}")]
    EigenvalueCollision { gap: f64, point: Vec<f64> },

    #[error("characteristic integration failed from {start:?}: {reason}")]
    IntegrationBlowup { start: Vec<f64>, reason: String },

    #[error("generation failed: {0}")]
    GenerationFailed(String),

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for errors caused by malformed or inconsistent input rather than
    /// by the mathematics of the fields under test.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownSymbol { .. }
                | Error::DimensionMismatch { .. }
                | Error::BadMu(_)
                | Error::ArityMismatch { .. }
                | Error::NotDiagonal { .. }
                | Error::UnknownExample(_)
                | Error::InvalidPlan(_)
                | Error::InvalidInput(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
