//! Run summaries: backlog, throughput, QoS outcomes and the stability diagnostic.

use serde::Serialize;

use crate::dynamics::{Environment, FrameRecord, SlotRecord, SystemState, TrafficClass};
use crate::error::{Error, Result};
use crate::region::DriftReport;

/// Number of block means kept in [`MetricsLog::backlog_series`].
pub const SERIES_BLOCKS: usize = 100;

/// Backlog below this many packets is never called divergent.
const DIVERGENCE_FLOOR: f64 = 1.0;
const DIVERGENCE_RATIO: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Whole-horizon packet counts, for conservation checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Totals {
    pub arrivals: Vec<u64>,
    pub delivered: Vec<u64>,
    pub drops: Vec<u64>,
    pub initial_backlog: Vec<u64>,
    pub final_backlog: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsLog {
    pub horizon: u64,
    pub warmup_slots: u64,
    pub measured_slots: u64,
    /// Users whose real queue enters the total backlog (best-effort users).
    pub counted: Vec<bool>,
    /// Time average of the counted users' backlog at slot start.
    pub mean_total_backlog: f64,
    /// Mean real backlog per slot; for real-time and rate-guaranteed users,
    /// the mean virtual backlog per frame.
    pub mean_backlog: Vec<f64>,
    /// Delivered packets per slot.
    pub throughput: Vec<f64>,
    /// Arrivals per slot.
    pub arrival_rate: Vec<f64>,
    pub rt_drop_ratio: Vec<Option<f64>>,
    /// Packets served per frame for rate-guaranteed users.
    pub rg_rate: Vec<Option<RateEstimate>>,
    pub quartile_backlog: [f64; 4],
    pub divergent: bool,
    /// Block means of the total backlog over the measured window.
    pub backlog_series: Vec<f64>,
    pub totals: Totals,
    pub drift: Option<DriftReport>,
}

impl MetricsLog {
    /// Arrival rate of the counted users.
    pub fn counted_arrival_rate(&self) -> f64 {
        self.arrival_rate
            .iter()
            .zip(&self.counted)
            .filter(|(_, c)| **c)
            .map(|(r, _)| r)
            .sum()
    }
}

/// Mean delay by Little's law: mean total backlog over the arrival rate.
pub fn little_delay(log: &MetricsLog) -> Result<f64> {
    let rate = log.counted_arrival_rate();
    if rate <= 0.0 {
        return Err(Error::ZeroArrivals);
    }
    Ok(log.mean_total_backlog / rate)
}

/// Quartile means of a backlog path and the divergence verdict: the last
/// quartile mean exceeds three times the first and at least one packet.
pub fn divergence_diagnostic(totals: &[u64]) -> ([f64; 4], bool) {
    let n = totals.len();
    let mut q = [0.0; 4];
    for (k, qk) in q.iter_mut().enumerate() {
        let (lo, hi) = (k * n / 4, (k + 1) * n / 4);
        if hi > lo {
            *qk = totals[lo..hi].iter().map(|&v| v as f64).sum::<f64>() / (hi - lo) as f64;
        }
    }
    let divergent = q[3] > DIVERGENCE_RATIO * q[0] && q[3] - q[0] > DIVERGENCE_FLOOR;
    (q, divergent)
}

fn block_means(totals: &[u64]) -> Vec<f64> {
    let n = totals.len();
    let blocks = SERIES_BLOCKS.min(n);
    (0..blocks)
        .map(|b| {
            let (lo, hi) = (b * n / blocks, (b + 1) * n / blocks);
            totals[lo..hi].iter().map(|&v| v as f64).sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

pub(crate) struct Accumulator {
    horizon: u64,
    warmup: u64,
    counted: Vec<bool>,
    classes: Vec<TrafficClass>,
    backlog_sum: Vec<f64>,
    virtual_sum: Vec<f64>,
    delivered: Vec<u64>,
    arrivals: Vec<u64>,
    rt_arrivals: Vec<u64>,
    rt_drops: Vec<u64>,
    rg_service: Vec<Vec<u64>>,
    measured_frames: u64,
    total_path: Vec<u64>,
    totals: Totals,
}

impl Accumulator {
    pub(crate) fn new(env: &Environment, horizon: u64, warmup: u64, initial: Vec<u64>) -> Self {
        let n = env.users();
        let classes: Vec<TrafficClass> = match &env.qos {
            Some(q) => q.classes.clone(),
            None => vec![TrafficClass::BestEffort; n],
        };
        let counted = classes
            .iter()
            .map(|c| matches!(c, TrafficClass::BestEffort))
            .collect();
        Self {
            horizon,
            warmup,
            counted,
            classes,
            backlog_sum: vec![0.0; n],
            virtual_sum: vec![0.0; n],
            delivered: vec![0; n],
            arrivals: vec![0; n],
            rt_arrivals: vec![0; n],
            rt_drops: vec![0; n],
            rg_service: vec![Vec::new(); n],
            measured_frames: 0,
            total_path: Vec::with_capacity((horizon - warmup) as usize),
            totals: Totals {
                arrivals: vec![0; n],
                delivered: vec![0; n],
                drops: vec![0; n],
                initial_backlog: initial,
                final_backlog: vec![0; n],
            },
        }
    }

    pub(crate) fn slot(&mut self, r: &SlotRecord, measured: bool) {
        for i in 0..r.delivered.len() {
            self.totals.delivered[i] += r.delivered[i];
            if !matches!(self.classes[i], TrafficClass::RealTime { .. }) {
                self.totals.arrivals[i] += r.arrivals[i];
            }
        }
        if !measured {
            return;
        }
        let mut total = 0u64;
        for i in 0..r.delivered.len() {
            self.delivered[i] += r.delivered[i];
            if self.counted[i] {
                self.backlog_sum[i] += r.backlog_before[i] as f64;
                self.arrivals[i] += r.arrivals[i];
                total += r.backlog_before[i];
            }
        }
        self.total_path.push(total);
    }

    pub(crate) fn frame(&mut self, f: &FrameRecord, measured: bool) {
        for s in &f.slots {
            self.slot(s, measured);
        }
        for i in 0..f.arrivals.len() {
            if let TrafficClass::RealTime { .. } = self.classes[i] {
                self.totals.arrivals[i] += f.arrivals[i];
                self.totals.drops[i] += f.drops[i];
            }
        }
        if !measured {
            return;
        }
        self.measured_frames += 1;
        for i in 0..f.arrivals.len() {
            match self.classes[i] {
                TrafficClass::RealTime { .. } => {
                    self.arrivals[i] += f.arrivals[i];
                    self.rt_arrivals[i] += f.arrivals[i];
                    self.rt_drops[i] += f.drops[i];
                    self.virtual_sum[i] += f.virtual_after[i];
                }
                TrafficClass::RateGuaranteed { .. } => {
                    self.rg_service[i].push(f.frame_service[i]);
                    self.virtual_sum[i] += f.virtual_after[i];
                }
                TrafficClass::BestEffort => {}
            }
        }
    }

    pub(crate) fn finish(mut self, state: &SystemState, drift: Option<DriftReport>) -> MetricsLog {
        let n = self.counted.len();
        let slots = (self.horizon - self.warmup) as f64;
        let frames = self.measured_frames.max(1) as f64;
        self.totals.final_backlog = state.backlog.clone();
        let mean_backlog = (0..n)
            .map(|i| {
                if self.counted[i] {
                    self.backlog_sum[i] / slots
                } else {
                    self.virtual_sum[i] / frames
                }
            })
            .collect();
        let rt_drop_ratio = (0..n)
            .map(|i| match self.classes[i] {
                TrafficClass::RealTime { .. } if self.rt_arrivals[i] > 0 => {
                    Some(self.rt_drops[i] as f64 / self.rt_arrivals[i] as f64)
                }
                TrafficClass::RealTime { .. } => Some(0.0),
                _ => None,
            })
            .collect();
        let rg_rate = (0..n)
            .map(|i| match self.classes[i] {
                TrafficClass::RateGuaranteed { .. } => Some(rate_estimate(&self.rg_service[i])),
                _ => None,
            })
            .collect();
        let (quartile_backlog, divergent) = divergence_diagnostic(&self.total_path);
        MetricsLog {
            horizon: self.horizon,
            warmup_slots: self.warmup,
            measured_slots: self.horizon - self.warmup,
            mean_total_backlog: self.total_path.iter().map(|&v| v as f64).sum::<f64>() / slots,
            mean_backlog,
            throughput: self.delivered.iter().map(|&d| d as f64 / slots).collect(),
            arrival_rate: self.arrivals.iter().map(|&a| a as f64 / slots).collect(),
            counted: self.counted,
            rt_drop_ratio,
            rg_rate,
            quartile_backlog,
            divergent,
            backlog_series: block_means(&self.total_path),
            totals: self.totals,
            drift,
        }
    }
}

fn rate_estimate(samples: &[u64]) -> RateEstimate {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return RateEstimate {
            mean: 0.0,
            std_err: 0.0,
        };
    }
    let mean = samples.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    RateEstimate {
        mean,
        std_err: (var / n).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_growth_is_divergent() {
        let path: Vec<u64> = (100..1000).collect();
        assert!(divergence_diagnostic(&path).1);
    }

    #[test]
    fn flat_and_draining_paths_are_not() {
        assert!(!divergence_diagnostic(&vec![7; 400]).1);
        let draining: Vec<u64> = (0..400).rev().collect();
        assert!(!divergence_diagnostic(&draining).1);
        let tiny: Vec<u64> = (0..400).map(|t| u64::from(t >= 300)).collect();
        assert!(!divergence_diagnostic(&tiny).1);
    }

    #[test]
    fn rate_estimate_of_constant_samples() {
        let r = rate_estimate(&[5, 5, 5]);
        assert_eq!(r.mean, 5.0);
        assert_eq!(r.std_err, 0.0);
    }
}
