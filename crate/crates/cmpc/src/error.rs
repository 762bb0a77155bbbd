use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} must be below 2^32")]
    ModulusTooLarge(u64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("duplicate abscissae")]
    DegeneratePoints,
    #[error("need at least {needed} evaluations, got {got}")]
    InsufficientEvaluations { needed: usize, got: usize },
    #[error("generalized Vandermonde system is singular")]
    SingularVandermonde,
    #[error("target power {0} is not in the support")]
    TargetNotInSupport(u64),
    #[error("{points} evaluation points for a support of size {support}")]
    SupportSizeMismatch { points: usize, support: usize },
    #[error("cannot draw {needed} distinct nonzero points in a field of size {p}")]
    FieldTooSmall { needed: usize, p: u64 },
    #[error("evaluations disagree with a polynomial of degree at most {0}")]
    InconsistentEvaluations(usize),
    #[error("dimension {m} is not divisible by {by}")]
    IndivisibleDimension { m: usize, by: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unsupported partition s={s}, t={t}")]
    UnsupportedPartition { s: u64, t: u64 },
    #[error("scheme {0} has no share construction")]
    CountOnlyScheme(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("branch selection failed: {0}")]
    InternalBranchError(String),
    #[error("{0} is out of range")]
    OutOfRange(String),
    #[error("transcript incomplete: {0}")]
    AuditIncomplete(String),
    #[error("configuration too large for exhaustive enumeration: {0}")]
    TooLargeForExhaustive(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
