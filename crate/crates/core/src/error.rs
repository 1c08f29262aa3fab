use alloc::string::String;

/// Errors raised by model construction, filtering, learning and evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),

    #[error("row {row} sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("dimension mismatch: {what} is {found}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("source chain is reducible: state {from} cannot reach state {to}")]
    Reducible { from: usize, to: usize },

    #[error("source chain is periodic with period {0}")]
    Periodic(usize),

    #[error("channel output {m_prime} has zero probability under the current predictor")]
    ImpossibleObservation { m_prime: usize },

    #[error("{what} would hold {count} entries, above the cap of {cap}")]
    TooLarge {
        what: &'static str,
        count: u128,
        cap: u128,
    },

    #[error("window {0} is unreachable from the invariant prior")]
    UnreachableWindow(u64),

    #[error("belief quantization learning requires the invariant prior: {0}")]
    NonInvariantPrior(String),

    #[error("source is not i.i.d.: row {0} differs from row 0")]
    NotIid(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
