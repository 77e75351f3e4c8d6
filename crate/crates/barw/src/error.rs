use thiserror::Error;

/// Errors across the crate. CLI maps these onto exit codes: validation
/// failures exit 2, budget overruns exit 3, cross-check failures exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not a sum of two squares")]
    NotInS(u64),

    #[error("{0} is not a prime congruent to 1 mod 4")]
    NotSplitPrime(u64),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("degenerate point ({0}, {1}): Var f(x) = 0")]
    DegeneratePoint(f64, f64),

    #[error(
        "estimated work {estimate} exceeds budget {budget}; raise --budget for an exact count"
    )]
    BudgetExceeded { estimate: u128, budget: u128 },

    #[error("search exhausted: no candidate up to {bound}")]
    NotFound { bound: u64 },

    #[error("cross-check failed: {0}")]
    CrossCheck(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed record: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
