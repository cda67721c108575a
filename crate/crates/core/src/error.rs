use thiserror::Error;

/// Every failure the library can report.
///
/// Numerical failures (solver, positivity, hypotheses) and configuration or
/// I/O failures are kept in one enum so the command-line front end can map
/// them to exit codes with a single `match`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("metric is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NonPositiveMetric { min_eigenvalue: f64 },

    #[error("matrix lost positivity relative to the metric{}", fmt_location(.location))]
    PositivityLost { location: Option<Vec<usize>> },

    #[error("spectrum is not admissible: eigenvalue {value:e} <= 0")]
    NonAdmissible { value: f64 },

    #[error("no threshold exists: {reason}")]
    InfeasibleThreshold { reason: String },

    #[error("lemma hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("jet of order {have} cannot supply derivatives up to order {need}")]
    InsufficientOrder { have: usize, need: usize },

    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),

    #[error("grid axis has {points} points, at least 4 are required")]
    GridTooSmall { points: usize },

    #[error("operation requires a periodic grid")]
    BoxGridUnsupported,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("linear solve stagnated after {iterations} iterations (relative residual {relative_residual:e})")]
    LinearSolveFailure {
        iterations: usize,
        relative_residual: f64,
    },

    #[error("no admissible Newton step length >= min_step (residual {residual:e})")]
    StepFailure { residual: f64 },

    #[error("continuity path failed at t = {t} after refinement")]
    ContinuityExhausted { t: f64 },

    #[error(
        "usub is not a subsolution at grid index {index:?} (sum 1/lambda - n/psi = {excess:e})"
    )]
    SubsolutionViolation { index: Vec<usize>, excess: f64 },

    #[error("state is not solved (residual {residual:e})")]
    NotSolved { residual: f64 },

    #[error("config error for `{key}`{}: {message}", fmt_line(.line))]
    Config {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

fn fmt_location(loc: &Option<Vec<usize>>) -> String {
    match loc {
        Some(idx) => format!(" at grid index {idx:?}"),
        None => String::new(),
    }
}

fn fmt_line(line: &Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn config(
        key: impl Into<String>,
        line: Option<usize>,
        msg: impl Into<String>,
    ) -> Self {
        Error::Config {
            key: key.into(),
            line,
            message: msg.into(),
        }
    }

    /// Exit code used by the command-line front end: 3 for configuration
    /// and input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::UnknownEntry(_)
            | Error::DimensionMismatch(_)
            | Error::GridTooSmall { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
