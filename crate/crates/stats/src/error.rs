#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("all differences are zero")]
    Degenerate,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("pairing key {0:?} appears more than once")]
    DuplicateKey(String),
    #[error("correlation undefined: zero variance in a ranking")]
    Undefined,
    #[error("table has no observations")]
    EmptyTable,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("exact enumeration exceeds {0} tables")]
    TooLarge(u64),
}
