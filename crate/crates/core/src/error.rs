//! Error types shared across the library.

use thiserror::Error;

/// Errors returned by simulation, solver, and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or violated model invariant. Messages name the
    /// violated bound or the offending parameter.
    #[error("configuration error: {0}")]
    Config(String),

    /// An input left the mathematical domain of an operation (for example
    /// `mu/(eta*nu) >= 1` in a pure-jump formula).
    #[error("domain error: {0}")]
    Domain(String),

    /// A quantity left the representable floating-point range, typically an
    /// exponential-utility overflow.
    #[error("numerical range error: {0}")]
    NumericalRange(String),

    /// A coefficient degeneracy that makes a formula meaningless
    /// (for example `|eta| < eta_min` where a division by `eta` is required).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Strategy evaluation failed during wealth integration.
    #[error("strategy evaluation failed at path {path}, step {step}: {source}")]
    StrategyEval {
        path: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// A Monte Carlo diagnostic could not be formed (weight degeneracy,
    /// excess overflow exclusions, empty checkpoint sets, ...).
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::NumericalRange(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
