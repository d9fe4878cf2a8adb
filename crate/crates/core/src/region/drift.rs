//! Empirical check of the quadratic Lyapunov drift inequality
//! `E[L(Q(t+1)) - L(Q(t)) | Q(t)] <= B + 2 sum_i Q_i (lambda_i - mu_hat_i)`
//! with `L(Q) = sum_i Q_i^2`.
//!
//! Conditioning on the exact backlog is data-starved, so slots are grouped
//! into ten equal-count buckets by total backlog and the mean gap between
//! drift and bound is tested in each bucket.

use serde::Serialize;

use super::delay::max_slot_service;
use crate::arrivals::ArrivalProcess;
use crate::dynamics::SlotRecord;
use crate::error::{Error, Result};
use crate::stats::ConditionalStats;

pub const DRIFT_BUCKETS: usize = 10;
/// A bucket is violated when its mean excess is this many standard errors above zero.
const VIOLATION_SIGMAS: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftSample {
    pub slot: u64,
    pub lyapunov: f64,
    pub drift: f64,
    pub bound: f64,
    pub total_backlog: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftBucket {
    pub min_backlog: u64,
    pub max_backlog: u64,
    pub slots: usize,
    pub mean_drift: f64,
    pub mean_bound: f64,
    /// Standard error of the mean of `drift - bound`.
    pub std_err: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftReport {
    pub b: f64,
    pub mean_drift: f64,
    pub buckets: Vec<DriftBucket>,
    pub violations: usize,
    pub violation_fraction: f64,
    #[serde(skip)]
    pub samples: Vec<DriftSample>,
}

/// `B = sum_i E[A_i^2] + (M x_max)^2`.
pub fn drift_constant(arrivals: &[ArrivalProcess], stats: &[ConditionalStats]) -> f64 {
    arrivals.iter().map(ArrivalProcess::second_moment).sum::<f64>()
        + max_slot_service(stats).powi(2)
}

/// Streaming drift checker fed one slot record at a time.
pub struct DriftChecker<'a> {
    stats: &'a [ConditionalStats],
    lambda: Vec<f64>,
    b: f64,
    samples: Vec<DriftSample>,
}

impl<'a> DriftChecker<'a> {
    pub fn new(arrivals: &[ArrivalProcess], stats: &'a [ConditionalStats]) -> Result<Self> {
        if arrivals.len() != stats.len() {
            return Err(Error::InvalidConfig(format!(
                "{} arrival processes for {} users",
                arrivals.len(),
                stats.len()
            )));
        }
        Ok(Self {
            stats,
            lambda: arrivals.iter().map(ArrivalProcess::mean).collect(),
            b: drift_constant(arrivals, stats),
            samples: Vec::new(),
        })
    }

    /// Expected service of each user given the decision and the estimates.
    fn expected_service(&self, r: &SlotRecord) -> Result<Vec<f64>> {
        let mut mu = vec![0.0; self.stats.len()];
        for (j, a) in r.allocation.channels.iter().enumerate() {
            if let Some(i) = a.user {
                let st = &self.stats[i];
                let row = st.row(r.estimates[i])?;
                mu[i] += a.rate as f64 * st.ccdf_in_row(row, j, a.rate);
            }
        }
        Ok(mu)
    }

    pub fn observe(&mut self, r: &SlotRecord) -> Result<()> {
        let mu = self.expected_service(r)?;
        let square = |q: &[u64]| q.iter().map(|&v| i128::from(v) * i128::from(v)).sum::<i128>();
        let before = square(&r.backlog_before);
        let drift = (square(&r.backlog_after) - before) as f64;
        let bound = self.b
            + 2.0
                * r.backlog_before
                    .iter()
                    .enumerate()
                    .map(|(i, &q)| q as f64 * (self.lambda[i] - mu[i]))
                    .sum::<f64>();
        self.samples.push(DriftSample {
            slot: r.slot,
            lyapunov: before as f64,
            drift,
            bound,
            total_backlog: r.backlog_before.iter().sum(),
        });
        Ok(())
    }

    pub fn finish(self) -> Result<DriftReport> {
        summarise(self.b, self.samples)
    }
}

fn summarise(b: f64, samples: Vec<DriftSample>) -> Result<DriftReport> {
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&k| samples[k].total_backlog);
    let groups = DRIFT_BUCKETS.min(n);
    let mut buckets = Vec::with_capacity(groups);
    for g in 0..groups {
        let members = &order[g * n / groups..(g + 1) * n / groups];
        let count = members.len() as f64;
        let gap: Vec<f64> = members
            .iter()
            .map(|&k| samples[k].drift - samples[k].bound)
            .collect();
        let mean_gap = gap.iter().sum::<f64>() / count;
        let var = if members.len() > 1 {
            gap.iter().map(|v| (v - mean_gap).powi(2)).sum::<f64>() / (count - 1.0)
        } else {
            0.0
        };
        let std_err = (var / count).sqrt();
        buckets.push(DriftBucket {
            min_backlog: samples[members[0]].total_backlog,
            max_backlog: samples[*members.last().unwrap()].total_backlog,
            slots: members.len(),
            mean_drift: members.iter().map(|&k| samples[k].drift).sum::<f64>() / count,
            mean_bound: members.iter().map(|&k| samples[k].bound).sum::<f64>() / count,
            std_err,
            violated: mean_gap > VIOLATION_SIGMAS * std_err,
        });
    }
    let violations = buckets.iter().filter(|b| b.violated).count();
    Ok(DriftReport {
        b,
        mean_drift: samples.iter().map(|s| s.drift).sum::<f64>() / n as f64,
        violation_fraction: violations as f64 / buckets.len() as f64,
        violations,
        buckets,
        samples,
    })
}

/// Drift check over a recorded trace.
pub fn drift_check(
    trace: &[SlotRecord],
    arrivals: &[ArrivalProcess],
    stats: &[ConditionalStats],
) -> Result<DriftReport> {
    let mut checker = DriftChecker::new(arrivals, stats)?;
    for r in trace {
        checker.observe(r)?;
    }
    checker.finish()
}
