//! Crate-wide error type.
//!
//! Everything that can go wrong falls into a small number of families:
//! malformed inputs (dimension mismatches, non-finite data, bad parameters),
//! regime violations (a requested quantity only exists under parameter
//! restrictions that the given model does not satisfy), resource caps, and
//! numeric blow-ups during simulation.  Soft conditions — a bound that is
//! vacuous, an estimator that stopped on its iteration cap — are *flags* on
//! result types, never errors.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument failed basic validation (wrong length, NaN, out of range).
    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    /// Vector/matrix/cloud dimensions do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// The model declaration itself is inconsistent (non-finite entries,
    /// a declared contraction exponent the matrix norm contradicts, …).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A parameter lies outside the regime in which the requested quantity
    /// is defined (e.g. a step size too large for contractivity).
    #[error("regime violation: {0}")]
    Regime(String),

    /// A closed-form result was requested for a model without one.
    #[error("no closed-form solution available: {0}")]
    UnsupportedOracle(String),

    /// Exact computation was requested where only equal-size inputs are
    /// supported, or an input exceeds a hard resource cap.
    #[error("unsupported input: {0}")]
    Unsupported(String),

    /// Enumeration or solver size exceeds the configured cap.
    #[error("cap exceeded in {context}: size {size} > cap {cap}")]
    CapExceeded {
        context: &'static str,
        size: u128,
        cap: u128,
    },

    /// A simulated state left the representable range.  The particle and
    /// step are named so the offending trajectory can be located.
    #[error("numeric overflow at step {step}, particle {particle}: state is no longer finite")]
    NumericOverflow { step: u64, particle: usize },

    /// An iterative solver failed to reach its tolerance within its budget
    /// in a context where a partial answer would be meaningless.
    #[error("no convergence in {context} after {iterations} iterations (residual {residual})")]
    NoConvergence {
        context: &'static str,
        iterations: u64,
        residual: f64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn invalid(arg: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            arg,
            reason: reason.into(),
        }
    }
}
