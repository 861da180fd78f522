use alloc::string::String;

/// Errors produced by the entropy toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("probability vector is empty")]
    EmptyProbabilities,

    #[error("probability at index {index} must be positive and finite, got {value}")]
    NonPositiveProbability { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, expected 1 within 1e-12")]
    NotNormalized { sum: f64 },

    #[error("sequence is empty")]
    EmptySequence,

    #[error(
        "symbol {symbol} at position {position} is outside an alphabet of size {alphabet_size}"
    )]
    SymbolOutOfRange {
        position: usize,
        symbol: u32,
        alphabet_size: u32,
    },

    #[error("block length must be at least 1")]
    ZeroBlockLength,

    #[error("block length {k} exceeds sequence length {len}")]
    BlockTooLong { k: usize, len: usize },

    #[error(
        "blocks of length {k} over an alphabet of {alphabet_size} symbols do not fit a 62-bit code"
    )]
    BlockEncodingOverflow { k: usize, alphabet_size: u32 },

    #[error("block counts are empty")]
    EmptyCounts,

    #[error("brute-force enumeration supports n <= {max}, got {n}")]
    EnumerationTooLarge { n: u64, max: u64 },

    #[error("combined variance of the two estimates is not positive")]
    ZeroVariance,

    #[error("estimate carries a clamped (negative) plug-in variance and cannot be tested")]
    Untestable,

    #[error("quantiles are degenerate: q95 = {q95}, q99 = {q99}")]
    DegenerateQuantiles { q95: f64, q99: f64 },

    #[error("bandwidth bracket [{w_min}, {w_max}] is empty or invalid")]
    InvalidBracket { w_min: usize, w_max: usize },

    #[error("window of {w} symbols does not fit twice into a sequence of {len}")]
    WindowTooLarge { w: usize, len: usize },

    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("timestamps must be strictly increasing (index {index})")]
    UnsortedTimestamps { index: usize },

    #[error("price at index {index} must be positive and finite, got {value}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("invalid `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
