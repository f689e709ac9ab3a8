use thiserror::Error;

/// Errors raised by the construction, verification and simulation stages.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("jet base points differ")]
    BasePointMismatch,

    #[error("nonpositive base value {value} at {point:?}")]
    Domain { value: f64, point: Vec<f64> },

    #[error("alpha = {alpha} is outside the admissible range for {what}")]
    FamilyRange { alpha: f64, what: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("steepness search exhausted after {steps} steps (alpha = {alpha}, m = {m}, n = {n})")]
    SearchExhausted { alpha: f64, m: f64, n: usize, steps: usize },

    #[error("construction invalid: {0}")]
    ConstructionInvalid(String),

    #[error("closed-form rate {closed_form} and jet oracle {oracle} disagree")]
    InternalInconsistency { closed_form: f64, oracle: f64 },

    #[error("profile construction failed: {0}")]
    Profile(String),

    #[error("assembly infeasible: {0}")]
    AssemblyInfeasible(String),

    #[error("resolution {0} is too small or even")]
    Resolution(usize),

    #[error("time step {dt} exceeds the admissible value {admissible}")]
    Stability { dt: f64, admissible: f64 },

    #[error("origin is outside the support")]
    OriginOutsideSupport,

    #[error("support reached the box boundary at t = {t}")]
    SupportAtBoundary { t: f64 },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
