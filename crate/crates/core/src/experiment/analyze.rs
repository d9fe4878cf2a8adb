use serde::Serialize;

use crate::arrivals::ArrivalProcess;
use crate::error::Result;
use crate::policy::StatWeights;
use crate::region::{
    delay_bound, drift_constant, max_slot_service, Formulation, RegionSolver, Verdict,
};

use super::config::Prepared;

#[derive(Clone, Debug, Serialize)]
pub struct Constants {
    pub mu: f64,
    pub rho: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointReport {
    /// Sweep value.
    pub mean: f64,
    /// Per-slot rates checked against the region.
    pub lambda: Vec<f64>,
    pub verdict: Verdict,
    pub epsilon: f64,
    pub gamma: StatWeights,
    pub alpha: Vec<f64>,
    /// Radial boundary scale along `lambda`.
    pub theta_star: Option<f64>,
    pub delay_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_bound_error: Option<String>,
    pub constants: Constants,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub name: String,
    pub formulation: Formulation,
    /// Per-slot rate change per unit of the sweep value.
    pub direction: Vec<f64>,
    /// Largest sweep value inside or on the boundary of the region.
    pub theta_star: Option<f64>,
    pub points: Vec<PointReport>,
}

pub fn analyze(prepared: &Prepared) -> Result<AnalysisReport> {
    let stats = &prepared.stats[..];
    let mut solver = RegionSolver::new(stats)?;
    let (base, direction) = prepared.rate_line()?;
    let theta_star = if direction.iter().all(|d| *d == 0.0) {
        None
    } else {
        solver.boundary_offset(&base, &direction).ok()
    };
    let mu = solver.max_service().into_iter().fold(f64::INFINITY, f64::min);
    let plain = prepared.qos.is_none();

    let mut points = Vec::new();
    for &mean in &prepared.config.arrivals.means {
        let lambda = prepared.slot_rates_at(mean)?;
        let cert = solver.membership(&lambda)?;
        let radial = if lambda.iter().any(|l| *l > 0.0) {
            Some(solver.boundary_offset(&vec![0.0; lambda.len()], &lambda)?)
        } else {
            None
        };
        let arrivals = prepared.arrivals_at(mean)?;
        let (delay, delay_error, k, b) = if plain {
            let min_second = arrivals
                .iter()
                .map(ArrivalProcess::second_moment)
                .fold(f64::INFINITY, f64::min);
            let k = (min_second > 0.0).then(|| max_slot_service(stats).powi(2) / min_second);
            let b = Some(drift_constant(&arrivals, stats));
            match delay_bound(&arrivals, stats) {
                Ok(d) => (Some(d.bound), None, k, b),
                Err(e) => (None, Some(e.to_string()), k, b),
            }
        } else {
            (None, None, None, None)
        };
        points.push(PointReport {
            mean,
            lambda,
            verdict: cert.verdict,
            epsilon: cert.epsilon,
            gamma: cert.gamma,
            alpha: cert.alpha,
            theta_star: radial,
            delay_bound: delay,
            delay_bound_error: delay_error,
            constants: Constants {
                mu,
                rho: radial.map(|t| 1.0 / t),
                k,
                b,
            },
        });
    }
    Ok(AnalysisReport {
        name: prepared.config.name.clone(),
        formulation: solver.formulation(),
        direction,
        theta_star,
        points,
    })
}
