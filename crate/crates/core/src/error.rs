use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// The requested chain needs moments past the largest finite order.
    #[error(
        "divergent moments: chain length {requested} needs moments through order {needed}, \
         but moments are finite only through order {finite_order}; largest valid n is {largest_valid_n} \
         (chain length {largest_valid_len})"
    )]
    DivergentMoments {
        requested: usize,
        needed: usize,
        finite_order: usize,
        largest_valid_n: usize,
        largest_valid_len: usize,
    },

    /// A Hankel determinant lost more than half of the working precision.
    #[error(
        "ill-conditioned Hankel matrix of order {order} (~{digits_lost:.1} digits lost); \
         valid coefficients through n = {valid_order}"
    )]
    Conditioning {
        order: usize,
        digits_lost: f64,
        valid_order: usize,
    },

    #[error("chain exhausted: requested length {requested} but the measure supports at most {available}")]
    ChainExhausted { requested: usize, available: usize },

    #[error("eigensolver did not converge for a {dim}x{dim} matrix (norm estimate {norm:.3e})")]
    NoConvergence { dim: usize, norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("accuracy: {0}")]
    Accuracy(String),

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
