use alloc::string::String;

/// Errors reported by the core library. Contract violations surface here rather
/// than as panics so the CLI can map them to exit codes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("spanning vectors are rank deficient")]
    RankDeficient,
    #[error("line is not transversal: angle {angle} <= mu {mu}")]
    NotTransversal { angle: f64, mu: f64 },
    #[error("line is horizontal and has no chart")]
    HorizontalLine,
    #[error("geometry does not fit the periodic grid: {0}")]
    WrapAround(String),
    #[error("cutoff {cutoff} exceeds the Nyquist frequency {nyquist}")]
    AboveNyquist { cutoff: f64, nyquist: f64 },
    #[error("dimension estimate needs at least 3 scales, got {0}")]
    TooFewScales(usize),
    #[error("every sampled subspace was rejected")]
    AllDegenerate,
    #[error("malformed point cloud: {0}")]
    InvalidCloud(String),
    #[error("grid of {requested} bytes exceeds the limit of {limit} bytes")]
    ResourceLimit { requested: u64, limit: u64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
