//! Upper bound on the mean queueing delay under MaxWeight-type policies.

use serde::Serialize;

use super::membership::RegionSolver;
use crate::arrivals::ArrivalProcess;
use crate::error::{Error, Result};
use crate::stats::ConditionalStats;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DelayBoundInputs {
    pub users: usize,
    pub sum_second_moment: f64,
    pub sum_mean: f64,
    /// Smallest per-user mean vertex rate.
    pub mu: f64,
    /// Radial load: `lambda` lies on the boundary of `rho` times the region.
    pub rho: f64,
    /// Second-moment constant `(M x_max)^2 / min_i E[A_i^2]`.
    pub k: f64,
}

impl DelayBoundInputs {
    /// `N (1 + K) sum E[A^2] / (2 mu (1 - rho) sum E[A])`.
    pub fn bound(&self) -> f64 {
        self.users as f64 * (1.0 + self.k) * self.sum_second_moment
            / (2.0 * self.mu * (1.0 - self.rho) * self.sum_mean)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DelayBound {
    pub bound: f64,
    pub inputs: DelayBoundInputs,
    /// Boundary scale along the arrival-rate direction (`1 / rho`).
    pub theta_star: f64,
}

/// Worst-case per-slot service of any user: every channel at the top state.
pub fn max_slot_service(stats: &[ConditionalStats]) -> f64 {
    stats
        .iter()
        .map(|s| s.channels() as f64 * s.space().x_max() as f64)
        .fold(0.0, f64::max)
}

pub fn delay_bound(arrivals: &[ArrivalProcess], stats: &[ConditionalStats]) -> Result<DelayBound> {
    if arrivals.len() != stats.len() {
        return Err(Error::InvalidConfig(format!(
            "{} arrival processes for {} users",
            arrivals.len(),
            stats.len()
        )));
    }
    for a in arrivals {
        a.validate()?;
    }
    let second: Vec<f64> = arrivals.iter().map(ArrivalProcess::second_moment).collect();
    if let Some(user) = second.iter().position(|m| *m <= 0.0) {
        return Err(Error::ZeroSecondMoment { user });
    }
    let lambda: Vec<f64> = arrivals.iter().map(ArrivalProcess::mean).collect();
    let sum_mean: f64 = lambda.iter().sum();
    if sum_mean <= 0.0 {
        return Err(Error::ZeroArrivals);
    }

    let mut solver = RegionSolver::new(stats)?;
    let cert = solver.membership(&lambda)?;
    if cert.verdict != super::Verdict::Inside {
        return Err(Error::NotInRegion {
            epsilon: cert.epsilon,
        });
    }
    let mu = solver.max_service().into_iter().fold(f64::INFINITY, f64::min);
    if !(mu > 0.0) {
        return Err(Error::DegenerateStats("a user has zero mean service".into()));
    }
    let theta_star = solver.boundary_offset(&vec![0.0; lambda.len()], &lambda)?;
    let rho = 1.0 / theta_star;
    let min_second = second.iter().cloned().fold(f64::INFINITY, f64::min);
    let k = max_slot_service(stats).powi(2) / min_second;
    let inputs = DelayBoundInputs {
        users: stats.len(),
        sum_second_moment: second.iter().sum(),
        sum_mean,
        mu,
        rho,
        k,
    };
    Ok(DelayBound {
        bound: inputs.bound(),
        inputs,
        theta_star,
    })
}
