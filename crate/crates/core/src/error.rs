use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input was malformed: non-finite entries, mismatched shapes, non-PSD covariance, etc.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Input was well formed but numerically degenerate (rank deficient).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The de-biasing formula is undefined for this dimension.
    #[error("unsupported dimension d={d}: {reason}")]
    UnsupportedDimension { d: usize, reason: &'static str },

    #[error("{name}={value} out of range {lo}..={hi}")]
    OutOfRange {
        name: &'static str,
        value: usize,
        lo: usize,
        hi: usize,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_range(name: &'static str, value: usize, lo: usize, hi: usize) -> Result<()> {
    if value < lo || value > hi {
        return Err(Error::OutOfRange {
            name,
            value,
            lo,
            hi,
        });
    }
    Ok(())
}
