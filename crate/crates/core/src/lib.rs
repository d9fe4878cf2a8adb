//! Downlink scheduling over fading channels with partial channel-state feedback.
//!
//! Users report a coarse estimate of their per-channel states (for instance the
//! sum over channels). The scheduler knows the conditional statistics of the
//! true states given each estimate and picks, slot by slot, which user to
//! serve on each channel and at what rate. The crate provides the channel and
//! feedback models, the scheduling policies, the queue simulator, and the
//! stability-region and delay-bound analysis, plus an experiment runner.

pub mod arrivals;
pub mod channel;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod policy;
pub mod region;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
