use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid too small: {0} nodes, need at least 3")]
    GridTooSmall(usize),
    #[error("grid coordinates not strictly increasing at node {0}")]
    NonMonotoneGrid(usize),
    #[error("profile length mismatch: {s} coordinates, {u} values")]
    LengthMismatch { s: usize, u: usize },
    #[error("non-finite conformal factor at node {0}")]
    NonFinite(usize),
    #[error("tip cap does not match the grid at s_max: {0}")]
    CapMismatch(String),
    #[error("coordinate {s} outside the represented domain [{lo}, {hi}]")]
    OutOfDomain { s: f64, lo: f64, hi: f64 },
    #[error("empty range [{0}, {1}]")]
    EmptyRange(f64, f64),
    #[error("target area {target} exceeds available area {available}")]
    TargetExceedsArea { target: f64, available: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("barrier evaluated outside its domain: {0}")]
    BarrierDomain(String),
    #[error("{0} is not a Ricci flow")]
    NotAFlow(&'static str),
    #[error("root finder failed: {0}")]
    RootFinder(String),
    #[error("Newton iteration did not converge at t = {t} (dt = {dt}, residual step {step:e})")]
    NewtonDivergence { t: f64, dt: f64, step: f64 },
    #[error("non-finite state at t = {0}")]
    Overflow(f64),
    #[error("time step underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },
    #[error("noose: {0}")]
    Noose(String),
    #[error("not covered: {0}")]
    NotCovered(String),
    #[error("condition never met: {0}")]
    ConditionNeverMet(String),
    #[error("hypotheses not met: {0}")]
    Hypotheses(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
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

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
