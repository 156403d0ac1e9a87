//! Shared error type for the library.
//!
//! # Overview
//! Every fallible operation returns [`Error`]. Variants carry enough context
//! to report the failing quantity without a backtrace; all are plain data and
//! comparable, which keeps tests straightforward.

use std::fmt;

/// Library-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix or vector dimensions do not line up.
    DimMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    /// A parameter is outside its admissible domain.
    InvalidParameter {
        name: &'static str,
        reason: String,
    },
    /// The threshold formula's logarithm argument is not greater than one,
    /// so no positive threshold exists for this prior/variance combination.
    DegenerateThreshold {
        log_arg: f64,
    },
    /// A ratio against a zero-norm reference vector is undefined.
    ZeroNorm(&'static str),
    /// The dictionary does not have full row rank, so the minimum-norm
    /// solution is not defined by the cached pseudoinverse.
    RankDeficient {
        rank: usize,
        rows: usize,
    },
    /// The per-atom stability bound is vacuous for this atom: its defining
    /// ratio has a nonpositive numerator (condition holds at any input
    /// signal-to-noise ratio) or a nonpositive denominator (bound undefined).
    StabilityVacuous {
        atom: usize,
    },
    /// A combinatorial search was requested beyond the enforced size bounds.
    SizeLimit {
        name: &'static str,
        max: usize,
        found: usize,
    },
    /// A matrix expected to be symmetric positive definite was not.
    NotPositiveDefinite {
        pivot: usize,
    },
    /// Container serialization or deserialization failed.
    Format(String),
    /// An input/output operation failed.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch {
                context,
                expected,
                found,
            } => write!(
                f,
                "dimension mismatch in {context}: expected {expected}, found {found}"
            ),
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter {name}: {reason}")
            }
            Error::DegenerateThreshold { log_arg } => write!(
                f,
                "degenerate prior/variance combination: threshold log argument {log_arg} <= 1"
            ),
            Error::ZeroNorm(what) => write!(f, "undefined for zero-norm {what}"),
            Error::RankDeficient { rank, rows } => {
                write!(f, "rank-deficient operator: rank {rank} < {rows} rows")
            }
            Error::StabilityVacuous { atom } => {
                write!(f, "stability condition vacuous for atom {atom}")
            }
            Error::SizeLimit { name, max, found } => {
                write!(f, "{name} = {found} exceeds the enforced bound {max}")
            }
            Error::NotPositiveDefinite { pivot } => {
                write!(f, "matrix not positive definite at pivot {pivot}")
            }
            Error::Format(msg) => write!(f, "container format error: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
