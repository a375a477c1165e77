use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The series could not certify its value: either the tail bound never
    /// met the tolerance within the term budget, or cancellation left an
    /// error bound too large for the result to be meaningful.
    #[error("series did not converge after {terms_used} terms (partial sum {partial:e}, error bound {error_bound:e})")]
    NonConvergence { terms_used: u64, partial: f64, error_bound: f64 },

    #[error("goodness-of-fit table has {bins} bins after merging; at least 2 are required")]
    DegenerateBins { bins: usize },

    #[error("fixture: {0}")]
    Fixture(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
