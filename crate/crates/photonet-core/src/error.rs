use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside its mathematical domain (negative rate,
    /// non-positive lifetime, ratio out of range, ...).
    Domain(&'static str),
    /// Structurally valid input that carries no usable information
    /// (all-zero field grid, all-zero rates, empty side peaks).
    DegenerateInput(&'static str),
    /// Invalid run configuration (step-size guard, mismatched delays,
    /// unsupported drive kind for the requested solver).
    Config(&'static str),
    /// Preset lookup failed.
    UnknownPreset(String),
    /// The steady-state system is singular (no losses at resonance).
    Singular(&'static str),
    /// Not enough events or peaks to form an estimate.
    InsufficientData(&'static str),
    /// An iterative procedure failed to converge.
    Convergence(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::DegenerateInput(msg) => write!(f, "degenerate input: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::UnknownPreset(name) => write!(f, "unknown preset: {name}"),
            Error::Singular(msg) => write!(f, "singular system: {msg}"),
            Error::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            Error::Convergence(msg) => write!(f, "convergence failure: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
