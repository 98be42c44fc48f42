//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value failed a domain check (probability out of range, empty
    /// vector, mismatched dimension, ...).
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Both self-transition probabilities are 1; the chain never mixes.
    #[error("no unique stationary distribution")]
    DegenerateChain,

    /// The sensing assignment problem has no feasible solution.
    #[error("no feasible sensing assignment")]
    Infeasible,

    /// OR-fusion was asked to combine an empty decision set.
    #[error("band not sensed")]
    BandNotSensed,

    /// The numeric quantile solver did not produce a finite threshold.
    #[error("threshold solver failed for pfa={pfa}, n={num_samples}")]
    ThresholdSolver { pfa: f64, num_samples: usize },

    /// A configuration key failed to parse or validate.
    #[error("config error: {key}: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
