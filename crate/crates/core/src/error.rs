use thiserror::Error;

/// Errors raised by the numerical routines and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the admissible range {range}")]
    Domain {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("f is not differentiable at the declared kink x = {0}")]
    Kink(f64),

    #[error("invalid profile table: {0}")]
    Table(String),

    #[error("step size underflow: integration stalled at x = {reach} (started at {start})")]
    StepUnderflow { start: f64, reach: f64 },

    #[error("integration exceeded {0} steps")]
    TooManySteps(usize),

    #[error("endpoint fit is ill-conditioned (|det| = {det:e}); use a larger spacing between the last nodes")]
    IllConditionedFit { det: f64 },

    #[error("lambda = {re}{im:+}i is numerically an eigenvalue (|W0| = {wronskian:e}, threshold {threshold:e})")]
    NearEigenvalue {
        re: f64,
        im: f64,
        wronskian: f64,
        threshold: f64,
    },

    #[error("periodic matching denominator is too small (|phi(pi)/phi(-pi) - 1| = {0:e}); lambda is close to an eigenvalue")]
    SingularDenominator(f64),

    #[error("stale eigenvalue {lambda}: |D| = {residual:e} exceeds {threshold:e}")]
    StaleEigenvalue {
        lambda: f64,
        residual: f64,
        threshold: f64,
    },

    #[error("root indicator is not real along the real axis: residue {0:e}")]
    ComplexIndicator(f64),

    #[error("grid mismatch: expected {expected} nodes, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("SVD did not converge within {0} iterations")]
    SvdNoConvergence(usize),

    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("config field `{field}`: {msg}")]
    ConfigRange { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, range: &'static str) -> Self {
        Error::Domain { what, value, range }
    }

    /// True for errors caused by inputs outside their documented range.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::Table(_)
                | Error::ConfigParse { .. }
                | Error::ConfigRange { .. }
        )
    }
}
