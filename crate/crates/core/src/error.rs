use thiserror::Error;

/// Errors produced by the arithmetic, representation and operator layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("p must be an odd prime (got {0})")]
    InvalidPrime(u64),

    #[error("operands live over different primes ({0} and {1})")]
    PrimeMismatch(u64, u64),

    #[error("level mismatch: {left} vs {right}")]
    LevelMismatch { left: u32, right: u32 },

    #[error("insufficient precision: level {available} given, level {needed} required")]
    InsufficientPrecision { needed: u32, available: u32 },

    #[error("denominator of {0} is not a power of p")]
    NotPPower(String),

    #[error("p^{exponent} exceeds the supported 62-bit range for p = {p}")]
    Overflow { p: u64, exponent: u32 },

    #[error("dimension d = {0} is outside the supported range 1..=4")]
    UnsupportedDimension(usize),

    #[error("invalid representation label: {0}")]
    InvalidLabel(String),

    #[error("invalid operator spec: {0}")]
    InvalidSpec(String),

    #[error("dense mode needs dimension {dim}, budget is {budget}")]
    BudgetExceeded { dim: u64, budget: u64 },

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("{0}")]
    OutOfRange(String),

    #[error("malformed input: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
