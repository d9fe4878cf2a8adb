use std::path::PathBuf;

use thiserror::Error;

use crate::region::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel model: {0}")]
    InvalidModel(String),

    #[error("joint channel space has {outcomes} outcomes, above the enumeration cap of {cap}")]
    EnumerationTooLarge { outcomes: u128, cap: u64 },

    #[error("estimate symbol {symbol} is not present in the statistics of user {user}")]
    UnknownEstimate { user: usize, symbol: u64 },

    #[error("joint estimate {0:?} has no entry in the stat weight table")]
    UnknownJointEstimate(Vec<u64>),

    #[error("invalid stat weights: {0}")]
    InvalidStatWeights(String),

    #[error("arrival rates are not strictly inside the stability region (epsilon = {epsilon:.3e})")]
    NotInRegion { epsilon: f64 },

    #[error("degenerate conditional statistics: {0}")]
    DegenerateStats(String),

    #[error("user {user} has zero arrival second moment")]
    ZeroSecondMoment { user: usize },

    #[error("measured aggregate arrival rate is zero")]
    ZeroArrivals,

    #[error("drift check needs at least one slot record")]
    EmptyTrace,

    #[error("horizon leaves no slots after warm-up (horizon {horizon}, warm-up {warmup})")]
    InvalidHorizon { horizon: u64, warmup: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown preset `{0}` (expected fig1, fig2, fig3 or example3a)")]
    UnknownPreset(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than by a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel(_)
                | Error::EnumerationTooLarge { .. }
                | Error::InvalidStatWeights(_)
                | Error::InvalidHorizon { .. }
                | Error::InvalidConfig(_)
                | Error::UnknownPreset(_)
                | Error::Json { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
