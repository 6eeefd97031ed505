use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("link index {index} out of range ({len} links)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("link at edge {x_left}, time {t} collides with an existing link")]
    Collision { x_left: i64, t: f64 },
    #[error("link at edge {x_left}, time {t} lies outside the domain")]
    OutOfDomain { x_left: i64, t: f64 },
    #[error("point (site {site}, time {t}) is invalid: {reason}")]
    BadPoint { site: i64, t: f64, reason: String },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("Hilbert space dimension {dim} exceeds guard {max}")]
    DimensionGuard { dim: usize, max: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("site {0} is frozen")]
    FrozenSite(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
