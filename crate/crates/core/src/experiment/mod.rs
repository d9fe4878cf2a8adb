//! Experiment configuration, presets, parameter sweeps and region reports.

mod analyze;
mod config;
mod presets;
mod sweep;

pub use analyze::{analyze, AnalysisReport, Constants, PointReport};
pub use config::{
    ArrivalSpec, ExperimentConfig, ModelFile, ModelSource, PolicySpec, Prepared, QosSpec, QosUser,
};
pub use presets::{multi_rate_model, on_off_model, preset, two_channel_model, PRESET_NAMES};
pub use sweep::{run_sweep, write_csv, SweepRow};
