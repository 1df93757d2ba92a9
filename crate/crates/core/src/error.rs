use thiserror::Error;

/// Errors surfaced by the analysis pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("undeclared identifier `{name}` at line {line}, column {column}")]
    Undeclared { name: String, line: usize, column: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("domain error evaluating `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: String },

    #[error("unbound symbol `{0}` during evaluation")]
    Unbound(String),

    #[error("too many sample points failed to evaluate ({failed} of {attempted})")]
    SamplingFailed { failed: usize, attempted: usize },

    #[error("no relative degree: L_g L_f^k h vanishes for every k < n ({trail})")]
    NoRelativeDegree { trail: String },

    #[error("degenerate point: {expr} is not identically zero but vanishes at the operating point")]
    Degenerate { expr: String },

    #[error("Jacobian of the output coordinates has rank {rank} < {expected} at the operating point")]
    RankDeficient { rank: usize, expected: usize },

    #[error("coordinate completion failed: {0}")]
    CompletionFailed(String),

    #[error("singular Jacobian (det = {det:e}) at {point:?}")]
    SingularJacobian { det: f64, point: Vec<f64>, time: Option<f64> },

    #[error("state became non-finite at t = {time}")]
    NonFinite { time: f64 },

    #[error("constraint Φ = 0 cannot be solved by coordinate substitution: {0}")]
    ConstraintNotExplicit(String),

    #[error("fibre sampling failed: {0}")]
    FibreSampling(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. }
            | Error::Undeclared { .. }
            | Error::Dimension(_)
            | Error::InvalidSystem(_)
            | Error::Precondition(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::Undeclared { .. } => "undeclared",
            Error::Dimension(_) => "dimension",
            Error::InvalidSystem(_) => "invalid_system",
            Error::Domain { .. } => "domain",
            Error::Unbound(_) => "unbound",
            Error::SamplingFailed { .. } => "sampling_failed",
            Error::NoRelativeDegree { .. } => "no_relative_degree",
            Error::Degenerate { .. } => "degenerate",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::CompletionFailed(_) => "completion_failed",
            Error::SingularJacobian { .. } => "singular_jacobian",
            Error::NonFinite { .. } => "non_finite",
            Error::ConstraintNotExplicit(_) => "constraint_not_explicit",
            Error::FibreSampling(_) => "fibre_sampling",
            Error::Precondition(_) => "precondition",
            Error::Io(_) => "io",
        }
    }

    /// Source position, when the error came from parsing.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            Error::Syntax { line, column, .. } | Error::Undeclared { line, column, .. } => Some((*line, *column)),
            _ => None,
        }
    }

    pub(crate) fn relocate(self, line_no: usize, col_no: usize) -> Self {
        match self {
            Error::Syntax { message, .. } => Error::Syntax { line: line_no, column: col_no, message },
            Error::Undeclared { name, .. } => Error::Undeclared { name, line: line_no, column: col_no },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
