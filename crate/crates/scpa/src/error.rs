use thiserror::Error;

/// Errors surfaced by the scheduling library.
#[derive(Debug, Error)]
pub enum Error {
    /// Integer arithmetic left the representable range instead of wrapping.
    #[error("integer overflow while computing {0}")]
    Overflow(String),

    /// An operation that requires a valid instance received a broken one.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// Malformed JSON input.
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    /// The hyperperiod of the given intervals is too large to schedule against.
    #[error("hyperperiod {hyperperiod} exceeds the supported limit {limit}")]
    HyperperiodTooLarge { hyperperiod: u64, limit: u64 },

    /// The simplex solver hit its iteration cap without reaching an optimum.
    #[error("linear program did not converge")]
    LpDidNotConverge,

    /// No offset assignment satisfies the per-region alignment constraints as written.
    #[error("offset constraints unsatisfiable as written")]
    OffsetConstraintsUnsatisfiable,
}

pub type Result<T> = std::result::Result<T, Error>;
