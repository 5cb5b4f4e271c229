use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// One violated parameter invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub key: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("missing required key `{0}`")]
    MissingKey(&'static str),

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("key `{0}` given more than once")]
    DuplicateKey(String),

    #[error("key `{key}`: `{value}` is not a finite number")]
    NotANumber { key: String, value: String },

    #[error("invalid parameters: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("{0}")]
    Usage(String),

    #[error("no real operating point: discriminant {discriminant} < 0")]
    NoRealOperatingPoint { discriminant: f64 },

    #[error("d-channel duty ratio is zero")]
    ZeroDuty,

    #[error("zero-sequence duty {d_0} outside the feasible range ({low}, {high})")]
    InfeasibleZeroSequence { d_0: f64, low: f64, high: f64 },

    #[error("phase {phase} duty {value} outside [0, 1] at theta = {theta} rad")]
    InfeasibleDuty { phase: char, value: f64, theta: f64 },

    #[error("sI - A is singular at s = {s}: s coincides with the eigenvalue {eigenvalue}")]
    PoleEvaluation { s: Complex64, eigenvalue: Complex64 },

    #[error("simulation diverged at sample {sample}")]
    Diverged { sample: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Process exit code: 2 usage/config, 3 infeasible model, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. }
            | Error::MissingKey(_)
            | Error::UnknownKey(_)
            | Error::DuplicateKey(_)
            | Error::NotANumber { .. }
            | Error::Invalid(_)
            | Error::Usage(_)
            | Error::Io(_) => 2,
            Error::NoRealOperatingPoint { .. }
            | Error::ZeroDuty
            | Error::InfeasibleZeroSequence { .. }
            | Error::InfeasibleDuty { .. }
            | Error::PoleEvaluation { .. } => 3,
            Error::Diverged { .. } => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
