//! Stability region, delay bound and drift diagnostics.

mod delay;
mod drift;
pub mod lp;
mod membership;
mod support;

pub use delay::{delay_bound, max_slot_service, DelayBound, DelayBoundInputs};
pub use drift::{
    drift_check, drift_constant, DriftBucket, DriftChecker, DriftReport, DriftSample, DRIFT_BUCKETS,
};
pub use membership::{
    boundary_scale, default_formulation, membership, membership_with, stat_service, stat_weights,
    Formulation, RegionCertificate, RegionSolver, Verdict, BOUNDARY_TOLERANCE, JOINT_TABLE_LIMIT,
};
