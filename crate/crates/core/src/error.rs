use thiserror::Error;

/// Errors surfaced by sketch construction, queries, and the binary codec.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SketchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite input value {0}")]
    NonFiniteInput(f64),
    #[error("sketch is empty")]
    Empty,
    #[error("quantile {0} is outside (0, 1]")]
    QuantileOutOfRange(f64),
    #[error("rank {rank} is outside [{lo}, {hi}]")]
    RankOutOfRange { rank: f64, lo: f64, hi: f64 },
    #[error("interpolation needs at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("knot positions must be strictly increasing (index {0})")]
    NonIncreasingKnots(usize),
    #[error("knot values must be non-decreasing (index {0})")]
    DecreasingKnotValues(usize),
    #[error("knot coordinates must be finite (index {0})")]
    NonFiniteKnot(usize),
    #[error("bucket {0} has no mass")]
    ZeroMassBucket(usize),
    #[error("bucket index {0} cannot be used here")]
    InvalidBucket(usize),
    #[error("pair ({0}, {1}) is not joinable")]
    NotJoinable(usize, usize),
    #[error("sketch has unflushed items; call flush() first")]
    Unflushed,
    #[error("sketch has no buckets yet")]
    Uninitialized,
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Decoding failures for the binary sketch format and value files.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown flag bits {0:#04x}")]
    UnknownFlags(u8),
    #[error("truncated payload: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("bucket count {0} is below the minimum of 6")]
    BucketCount(u32),
    #[error("threshold {index} is not finite")]
    NonFiniteThreshold { index: usize },
    #[error("thresholds not strictly increasing at index {index}")]
    NonMonotoneThresholds { index: usize },
    #[error("counter {index} is negative or not finite")]
    BadCounter { index: usize },
    #[error("heavy-hitter record {index} is invalid")]
    BadHeavyHitter { index: usize },
    #[error("stored mass {stored} does not match header n = {n}")]
    MassMismatch { stored: f64, n: u64 },
    #[error("line {line}: cannot parse {text:?} as a finite number")]
    BadValue { line: usize, text: String },
}

pub type Result<T, E = SketchError> = std::result::Result<T, E>;
