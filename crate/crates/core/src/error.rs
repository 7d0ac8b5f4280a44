use thiserror::Error;

/// Every failure the pipeline can report.
///
/// Rigorous stages never recover from these silently: a failed bound is a
/// failed proof, and the caller decides what to change.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("interval division by a denominator containing zero")]
    DivisionByZeroInterval,
    #[error("rectangle division by a denominator whose modulus may vanish")]
    DivisionByZeroRectangle,
    #[error("function balls live on different discs or truncation degrees")]
    DomainMismatch,
    #[error("composition contract failed for {what}: theta upper bound {theta}")]
    CompositionContractFailure { what: String, theta: String },
    #[error("point is not inside the closed domain disc (|z - c| <= {bound} not certified)")]
    PointOutsideDomain { bound: String },
    #[error("coefficient index {index} beyond truncation degree {degree}")]
    IndexBeyondTruncation { index: usize, degree: usize },
    #[error("normalisation a = G(1) encloses zero")]
    NormalizationSingular,
    #[error("domain extension failed at boundary rectangle {index} ({condition})")]
    ContainmentFailure { index: usize, condition: String },
    #[error("recursive extension exceeded depth {depth}")]
    DepthExceeded { depth: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("could not certify invertibility of the linear map (residual bound {bound})")]
    InversionUncertified { bound: String },
    #[error("tail contraction failed: {what} theta upper bound {theta} is not < 1")]
    TailContractFailure { what: String, theta: String },
    #[error("column {column} failed")]
    ColumnFailure {
        column: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("certification failed: epsilon {epsilon}, kappa {kappa}, rho {rho}")]
    CertificationFailed {
        epsilon: String,
        kappa: String,
        rho: String,
    },
    #[error("Newton iteration did not converge after {iterations} steps (residual {residual})")]
    NewtonDivergence { iterations: usize, residual: String },
    #[error("eigenvalue selection is ambiguous: {0}")]
    EigenSelectionAmbiguous(String),
    #[error("matrix is numerically singular")]
    SingularJacobian,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("missing certificate for {0}")]
    MissingCertificate(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("stage {stage} failed")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
