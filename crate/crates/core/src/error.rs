//! Error type shared across the library.
//!
//! Construction errors (bad densities, out-of-range parameters) and runtime
//! failures (root brackets that never close, rank-deficient designs) are kept
//! in one enum so callers can match on the failure class without chasing
//! conversion chains.

use thiserror::Error;

/// Library-wide error enum.
#[derive(Debug, Error)]
pub enum Error {
    /// A spectral density failed validation: bad weights, non-positive
    /// support, empty atom list, or an inconsistent exchangeability claim.
    #[error("invalid spectral density: {0}")]
    InvalidDensity(String),

    /// A parameter is outside the domain where the requested quantity is
    /// defined (overparametrization ratio at or below 1, probability outside
    /// (0, 1), target error below the oracle floor, and so on).
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// A scalar root-finder could not bracket or close in on its root.
    #[error("root search failed: {0}")]
    RootSearch(String),

    /// The asymptotic formulas degenerate at this parameter point (a
    /// denominator crossed zero or a variance term lost positivity).
    #[error("degenerate prediction: {0}")]
    Degenerate(String),

    /// A linear solve hit a Gram matrix that is numerically rank-deficient.
    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    /// Writing experiment output failed.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used by every fallible function in the crate.
pub type Result<T> = std::result::Result<T, Error>;
