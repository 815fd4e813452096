use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty domain: {0}")]
    EmptyDomain(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} = {requested} exceeds the sieve limit {limit}")]
    OutOfRange {
        what: &'static str,
        requested: u64,
        limit: u64,
    },

    #[error("{what}: size {count} exceeds cap {cap}")]
    Size { what: String, count: u128, cap: u128 },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("normalization is zero: {0}")]
    ZeroNormalization(String),

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("quadrature did not converge: coarse {coarse_re:+.3e}{coarse_im:+.3e}i, fine {fine_re:+.3e}{fine_im:+.3e}i, tolerance {tol:.1e}")]
    Quadrature {
        coarse_re: f64,
        coarse_im: f64,
        fine_re: f64,
        fine_im: f64,
        tol: f64,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
