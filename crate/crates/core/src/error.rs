use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("outside the domain of the formula: {0}")]
    Domain(String),

    #[error("series not converged after {terms} terms (partial sum {partial_sum}, last term {last_term:e})")]
    SeriesTruncation {
        partial_sum: f64,
        terms: usize,
        last_term: f64,
    },

    #[error("no admissible delta down to {delta_min:e}: {reason}")]
    Infeasible { delta_min: f64, reason: String },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("regime mismatch: {0}")]
    Regime(String),

    #[error("exhaustive enumeration refused for path of length {len} (limit {limit})")]
    TooLong { len: usize, limit: usize },

    #[error("pathwise invariant violated: {0}")]
    Invariant(String),

    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

/// Rejects NaN, infinities and negative truncation levels.
pub(crate) fn check_level(c: f64) -> Result<()> {
    if c.is_finite() && c >= 0.0 {
        Ok(())
    } else {
        Err(param(format!(
            "truncation level must be finite and >= 0, got {c}"
        )))
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(param(format!("{name} must be finite and > 0, got {v}")))
    }
}
