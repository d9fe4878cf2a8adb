//! Slot-by-slot and frame-by-frame evolution of the queues.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arrivals::{ArrivalProcess, ArrivalSampler};
use crate::channel::UserChannelModel;
use crate::error::{Error, Result};
use crate::metrics::{Accumulator, MetricsLog};
use crate::policy::{Allocation, Policy};
use crate::region::DriftChecker;
use crate::rng::ReplicationRng;
use crate::stats::ConditionalStats;

/// Traffic class of a user in frame (QoS) mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrafficClass {
    /// Packets expire at the end of their arrival frame; at most
    /// `drop_ratio` of them may be dropped in the long run.
    RealTime { drop_ratio: f64 },
    /// Always backlogged; wants at least `min_rate` packets per frame.
    RateGuaranteed { min_rate: f64 },
    BestEffort,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosSetup {
    pub frame_len: u32,
    pub classes: Vec<TrafficClass>,
}

impl QosSetup {
    fn validate(&self, users: usize) -> Result<()> {
        if self.frame_len == 0 {
            return Err(Error::InvalidConfig("frame length must be at least 1".into()));
        }
        if self.classes.len() != users {
            return Err(Error::InvalidConfig(format!(
                "{} traffic classes for {users} users",
                self.classes.len()
            )));
        }
        for c in &self.classes {
            match *c {
                TrafficClass::RealTime { drop_ratio } if !(0.0..=1.0).contains(&drop_ratio) => {
                    return Err(Error::InvalidConfig(format!(
                        "drop ratio {drop_ratio} outside [0, 1]"
                    )));
                }
                TrafficClass::RateGuaranteed { min_rate }
                    if !min_rate.is_finite() || min_rate < 0.0 =>
                {
                    return Err(Error::InvalidConfig(format!("minimum rate {min_rate} is invalid")));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Everything a replication needs besides its state and random streams.
#[derive(Clone, Debug)]
pub struct Environment {
    pub models: Arc<Vec<UserChannelModel>>,
    pub stats: Arc<Vec<ConditionalStats>>,
    pub arrivals: Vec<ArrivalProcess>,
    pub policy: Policy,
    pub qos: Option<QosSetup>,
}

impl Environment {
    pub fn new(
        models: Arc<Vec<UserChannelModel>>,
        stats: Arc<Vec<ConditionalStats>>,
        arrivals: Vec<ArrivalProcess>,
        policy: Policy,
        qos: Option<QosSetup>,
    ) -> Result<Self> {
        let n = models.len();
        if n == 0 {
            return Err(Error::InvalidModel("no users".into()));
        }
        if stats.len() != n || arrivals.len() != n {
            return Err(Error::InvalidConfig(format!(
                "{n} users but {} statistics tables and {} arrival processes",
                stats.len(),
                arrivals.len()
            )));
        }
        let m = models[0].channels();
        if models.iter().any(|u| u.channels() != m) || stats.iter().any(|s| s.channels() != m) {
            return Err(Error::InvalidModel("users disagree on the channel count".into()));
        }
        for a in &arrivals {
            a.validate()?;
        }
        if let Some(q) = &qos {
            q.validate(n)?;
        }
        if let Policy::Stat(g) = &policy {
            if g.users() != n {
                return Err(Error::InvalidStatWeights(format!(
                    "weights for {} users in a {n}-user system",
                    g.users()
                )));
            }
        }
        Ok(Self {
            models,
            stats,
            arrivals,
            policy,
            qos,
        })
    }

    pub fn users(&self) -> usize {
        self.models.len()
    }

    pub fn channels(&self) -> usize {
        self.models[0].channels()
    }

    fn class(&self, user: usize) -> &TrafficClass {
        match &self.qos {
            Some(q) => &q.classes[user],
            None => &TrafficClass::BestEffort,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemState {
    /// Real backlog: the queue of best-effort users, the current-frame buffer
    /// of real-time users, zero for rate-guaranteed users.
    pub backlog: Vec<u64>,
    /// Virtual backlog of real-time and rate-guaranteed users.
    pub virtual_backlog: Vec<f64>,
    pub slot: u64,
    pub frame: u64,
}

impl SystemState {
    pub fn new(users: usize) -> Self {
        Self::with_backlog(vec![0; users])
    }

    pub fn with_backlog(backlog: Vec<u64>) -> Self {
        let n = backlog.len();
        Self {
            backlog,
            virtual_backlog: vec![0.0; n],
            slot: 0,
            frame: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub backlog_before: Vec<u64>,
    pub estimates: Vec<u64>,
    pub allocation: Allocation,
    /// Per channel: an assigned transmission was received.
    pub success: Vec<bool>,
    /// Per user: packets the channel could carry, `mu_i(t)`.
    pub service: Vec<u64>,
    /// Per user: packets actually removed from the queue.
    pub delivered: Vec<u64>,
    pub arrivals: Vec<u64>,
    pub backlog_after: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameRecord {
    pub frame: u64,
    /// Arrivals at the frame start (zero for rate-guaranteed users).
    pub arrivals: Vec<u64>,
    pub slots: Vec<SlotRecord>,
    /// Packets credited to each user over the frame: delivered packets for
    /// queued users, raw service for rate-guaranteed users.
    pub frame_service: Vec<u64>,
    pub drops: Vec<u64>,
    pub virtual_after: Vec<f64>,
}

/// Real-time virtual queue: `(Y - served + A (1 - alpha))^+`.
pub fn rt_virtual_update(y: f64, served: u64, arrivals: u64, drop_ratio: f64) -> f64 {
    (y - served as f64 + arrivals as f64 * (1.0 - drop_ratio)).max(0.0)
}

/// Rate-guaranteed virtual queue: `(Z - served + beta)^+`.
pub fn rg_virtual_update(z: f64, served: u64, min_rate: f64) -> f64 {
    (z - served as f64 + min_rate).max(0.0)
}

/// Steps one replication, reusing sampling buffers between slots.
pub struct Simulator<'e> {
    env: &'e Environment,
    samplers: Vec<ArrivalSampler>,
    state_idx: Vec<Vec<usize>>,
    x: Vec<Vec<u32>>,
    estimates: Vec<u64>,
}

impl<'e> Simulator<'e> {
    pub fn new(env: &'e Environment) -> Result<Self> {
        let samplers = env
            .arrivals
            .iter()
            .map(ArrivalProcess::sampler)
            .collect::<Result<Vec<_>>>()?;
        let n = env.users();
        let m = env.channels();
        Ok(Self {
            env,
            samplers,
            state_idx: vec![vec![0; m]; n],
            x: vec![vec![0; m]; n],
            estimates: vec![0; n],
        })
    }

    fn observe_channels(&mut self, rng: &mut ReplicationRng) {
        for (i, model) in self.env.models.iter().enumerate() {
            self.estimates[i] =
                model.sample_into(&mut self.state_idx[i], &mut self.x[i], &mut rng.channel);
        }
    }

    /// Decides and transmits; returns (allocation, success flags, service).
    fn transmit(
        &mut self,
        weights: &[f64],
        rng: &mut ReplicationRng,
    ) -> Result<(Allocation, Vec<bool>, Vec<u64>)> {
        let allocation = self.env.policy.decide(
            weights,
            &self.estimates,
            &self.env.stats,
            &self.env.models,
            &mut rng.policy,
        )?;
        let mut service = vec![0u64; self.env.users()];
        let success = allocation
            .channels
            .iter()
            .enumerate()
            .map(|(j, a)| match a.user {
                Some(i) => {
                    let ok = a.rate <= self.x[i][j];
                    if ok {
                        service[i] += u64::from(a.rate);
                    }
                    ok
                }
                None => false,
            })
            .collect();
        Ok((allocation, success, service))
    }

    fn sample_arrivals(&self, rng: &mut ReplicationRng) -> Vec<u64> {
        self.samplers
            .iter()
            .map(|s| s.sample(&mut rng.arrivals))
            .collect()
    }

    /// Plain mode: observe, decide on the current backlog, serve, then add
    /// this slot's arrivals: `Q <- (Q - mu)^+ + A`.
    pub fn step_slot(
        &mut self,
        state: &mut SystemState,
        rng: &mut ReplicationRng,
    ) -> Result<SlotRecord> {
        self.observe_channels(rng);
        let weights: Vec<f64> = state.backlog.iter().map(|&q| q as f64).collect();
        let (allocation, success, service) = self.transmit(&weights, rng)?;
        let arrivals = self.sample_arrivals(rng);
        let backlog_before = state.backlog.clone();
        let mut delivered = vec![0u64; service.len()];
        for i in 0..service.len() {
            delivered[i] = service[i].min(state.backlog[i]);
            state.backlog[i] = state.backlog[i] - delivered[i] + arrivals[i];
        }
        let record = SlotRecord {
            slot: state.slot,
            backlog_before,
            estimates: self.estimates.clone(),
            allocation,
            success,
            service,
            delivered,
            arrivals,
            backlog_after: state.backlog.clone(),
        };
        state.slot += 1;
        Ok(record)
    }

    /// Frame mode: one frame of `T` slots with weights frozen at the frame
    /// start. Best-effort arrivals join with the first slot's update
    /// (`(Q - mu + A)^+`); real-time arrivals fill the frame buffer and
    /// whatever remains at the frame end is dropped.
    pub fn step_frame(
        &mut self,
        state: &mut SystemState,
        rng: &mut ReplicationRng,
    ) -> Result<FrameRecord> {
        let qos = self
            .env
            .qos
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("frame stepping needs a QoS setup".into()))?;
        let n = self.env.users();
        let mut arrivals = self.sample_arrivals(rng);
        let mut weights = vec![0.0; n];
        for i in 0..n {
            match self.env.class(i) {
                TrafficClass::RealTime { .. } => {
                    weights[i] = state.virtual_backlog[i];
                    state.backlog[i] = arrivals[i];
                }
                TrafficClass::RateGuaranteed { .. } => {
                    weights[i] = state.virtual_backlog[i];
                    arrivals[i] = 0;
                }
                TrafficClass::BestEffort => weights[i] = state.backlog[i] as f64,
            }
        }

        let mut frame_service = vec![0u64; n];
        let mut slots = Vec::with_capacity(qos.frame_len as usize);
        for t in 0..qos.frame_len {
            self.observe_channels(rng);
            let (allocation, success, service) = self.transmit(&weights, rng)?;
            let backlog_before = state.backlog.clone();
            let mut delivered = vec![0u64; n];
            let mut slot_arrivals = vec![0u64; n];
            for i in 0..n {
                match self.env.class(i) {
                    TrafficClass::RealTime { .. } => {
                        delivered[i] = service[i].min(state.backlog[i]);
                        state.backlog[i] -= delivered[i];
                    }
                    TrafficClass::RateGuaranteed { .. } => delivered[i] = service[i],
                    TrafficClass::BestEffort => {
                        let available = if t == 0 {
                            slot_arrivals[i] = arrivals[i];
                            state.backlog[i] + arrivals[i]
                        } else {
                            state.backlog[i]
                        };
                        delivered[i] = service[i].min(available);
                        state.backlog[i] = available - delivered[i];
                    }
                }
                frame_service[i] += delivered[i];
            }
            slots.push(SlotRecord {
                slot: state.slot,
                backlog_before,
                estimates: self.estimates.clone(),
                allocation,
                success,
                service,
                delivered,
                arrivals: slot_arrivals,
                backlog_after: state.backlog.clone(),
            });
            state.slot += 1;
        }

        let mut drops = vec![0u64; n];
        for i in 0..n {
            match *self.env.class(i) {
                TrafficClass::RealTime { drop_ratio } => {
                    drops[i] = state.backlog[i];
                    state.backlog[i] = 0;
                    state.virtual_backlog[i] = rt_virtual_update(
                        state.virtual_backlog[i],
                        frame_service[i],
                        arrivals[i],
                        drop_ratio,
                    );
                }
                TrafficClass::RateGuaranteed { min_rate } => {
                    state.virtual_backlog[i] =
                        rg_virtual_update(state.virtual_backlog[i], frame_service[i], min_rate);
                }
                TrafficClass::BestEffort => {}
            }
        }
        let record = FrameRecord {
            frame: state.frame,
            arrivals,
            slots,
            frame_service,
            drops,
            virtual_after: state.virtual_backlog.clone(),
        };
        state.frame += 1;
        Ok(record)
    }
}

pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Slots to simulate (rounded down to whole frames in QoS mode).
    pub horizon: u64,
    pub warmup_fraction: f64,
    pub seed: u64,
    pub stream: u64,
    /// Initial real backlog per user; empty means all zero.
    pub initial_backlog: Vec<u64>,
    /// Collect Lyapunov drift samples (plain mode only).
    pub track_drift: bool,
}

impl RunConfig {
    pub fn new(horizon: u64, seed: u64) -> Self {
        Self {
            horizon,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            seed,
            stream: 0,
            initial_backlog: Vec::new(),
            track_drift: false,
        }
    }
}

/// Runs one replication and summarises it over the post-warm-up window.
pub fn run(env: &Environment, config: &RunConfig) -> Result<MetricsLog> {
    if !(0.0..1.0).contains(&config.warmup_fraction) {
        return Err(Error::InvalidConfig(format!(
            "warm-up fraction {} outside [0, 1)",
            config.warmup_fraction
        )));
    }
    let n = env.users();
    let initial = if config.initial_backlog.is_empty() {
        vec![0; n]
    } else if config.initial_backlog.len() == n {
        config.initial_backlog.clone()
    } else {
        return Err(Error::InvalidConfig(format!(
            "initial backlog has {} entries for {n} users",
            config.initial_backlog.len()
        )));
    };
    let mut state = SystemState::with_backlog(initial.clone());
    let mut rng = ReplicationRng::new(config.seed, config.stream);
    let mut sim = Simulator::new(env)?;

    match &env.qos {
        None => {
            let warmup = (config.horizon as f64 * config.warmup_fraction).floor() as u64;
            if config.horizon <= warmup {
                return Err(Error::InvalidHorizon {
                    horizon: config.horizon,
                    warmup,
                });
            }
            let mut acc = Accumulator::new(env, config.horizon, warmup, initial);
            let mut drift = if config.track_drift {
                Some(DriftChecker::new(&env.arrivals, &env.stats)?)
            } else {
                None
            };
            for t in 0..config.horizon {
                let record = sim.step_slot(&mut state, &mut rng)?;
                let measured = t >= warmup;
                acc.slot(&record, measured);
                if measured {
                    if let Some(d) = drift.as_mut() {
                        d.observe(&record)?;
                    }
                }
            }
            let drift = drift.map(DriftChecker::finish).transpose()?;
            Ok(acc.finish(&state, drift))
        }
        Some(qos) => {
            let t = u64::from(qos.frame_len);
            let frames = config.horizon / t;
            let warm_frames = (frames as f64 * config.warmup_fraction).floor() as u64;
            if frames <= warm_frames {
                return Err(Error::InvalidHorizon {
                    horizon: config.horizon,
                    warmup: warm_frames * t,
                });
            }
            let mut acc = Accumulator::new(env, frames * t, warm_frames * t, initial);
            for k in 0..frames {
                let record = sim.step_frame(&mut state, &mut rng)?;
                acc.frame(&record, k >= warm_frames);
            }
            Ok(acc.finish(&state, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{EstimatorSpec, ModelSpec};
    use crate::policy::Rounding;
    use crate::stats::derive_all;

    pub(crate) fn environment(
        spec: &ModelSpec,
        arrivals: Vec<ArrivalProcess>,
        policy: Policy,
        qos: Option<QosSetup>,
    ) -> Environment {
        let models = spec.build().unwrap();
        let stats = derive_all(&models).unwrap();
        Environment::new(Arc::new(models), Arc::new(stats), arrivals, policy, qos).unwrap()
    }

    fn example_3a() -> ModelSpec {
        ModelSpec {
            users: 1,
            channels: 2,
            state_space: vec![0, 2, 6],
            marginals: vec![vec![vec![0.5, 0.5, 0.0], vec![0.5, 0.0, 0.5]]],
            estimator: EstimatorSpec::AvgFloor,
        }
    }

    #[test]
    fn virtual_queue_arithmetic() {
        assert_eq!(rg_virtual_update(0.0, 5, 2.0), 0.0);
        assert!((rt_virtual_update(0.0, 7, 10, 0.01) - 2.9).abs() < 1e-12);
        assert_eq!(rg_virtual_update(4.0, 1, 2.0), 5.0);
    }

    #[test]
    fn zero_arrivals_drain_and_stay_empty() {
        let env = environment(
            &example_3a(),
            vec![ArrivalProcess::Zero],
            Policy::MaxWeight,
            None,
        );
        let mut sim = Simulator::new(&env).unwrap();
        let mut state = SystemState::with_backlog(vec![20]);
        let mut rng = ReplicationRng::new(3, 0);
        for _ in 0..200 {
            let r = sim.step_slot(&mut state, &mut rng).unwrap();
            assert!(r.backlog_after[0] <= r.backlog_before[0]);
        }
        assert_eq!(state.backlog, vec![0]);
    }

    #[test]
    fn saturated_single_user_service() {
        let run_with = |policy| {
            let env = environment(&example_3a(), vec![ArrivalProcess::Zero], policy, None);
            let mut cfg = RunConfig::new(100_000, 1);
            cfg.initial_backlog = vec![1_000_000_000];
            run(&env, &cfg).unwrap()
        };
        let mw = run_with(Policy::MaxWeight);
        assert!((mw.throughput[0] - 4.0).abs() < 0.1, "{}", mw.throughput[0]);
        let naive = run_with(Policy::NaiveMaxWeight(Rounding::Floor));
        assert!((naive.throughput[0] - 2.0).abs() < 0.1, "{}", naive.throughput[0]);
    }

    #[test]
    fn successful_transmissions_are_within_the_state() {
        let env = environment(
            &ModelSpec::symmetric(3, 4, vec![0, 1, 2, 3], vec![0.25; 4], EstimatorSpec::Sum),
            vec![ArrivalProcess::Binomial { trials: 10, mean: 1.5 }; 3],
            Policy::IterativeMaxWeight,
            None,
        );
        let mut sim = Simulator::new(&env).unwrap();
        let mut state = SystemState::new(3);
        let mut rng = ReplicationRng::new(9, 2);
        for _ in 0..2_000 {
            let r = sim.step_slot(&mut state, &mut rng).unwrap();
            for i in 0..3 {
                let granted: u64 = r.allocation.channels_of(i).map(|(_, rate)| u64::from(rate)).sum();
                assert!(r.delivered[i] <= r.service[i] && r.service[i] <= granted);
                assert!(r.backlog_after[i] as i64 - r.backlog_before[i] as i64 >= r.arrivals[i] as i64 - 12);
            }
        }
    }

    #[test]
    fn rejects_horizons_without_measured_slots() {
        let env = environment(&example_3a(), vec![ArrivalProcess::Zero], Policy::MaxWeight, None);
        assert!(matches!(
            run(&env, &RunConfig::new(0, 1)),
            Err(Error::InvalidHorizon { .. })
        ));
        let qos = QosSetup {
            frame_len: 10,
            classes: vec![TrafficClass::BestEffort],
        };
        let env = environment(&example_3a(), vec![ArrivalProcess::Zero], Policy::QosMaxWeight, Some(qos));
        assert!(matches!(
            run(&env, &RunConfig::new(9, 1)),
            Err(Error::InvalidHorizon { .. })
        ));
    }

    #[test]
    fn frame_mode_without_qos_users_batches_arrivals() {
        let spec = ModelSpec::symmetric(2, 2, vec![0, 1], vec![0.5, 0.5], EstimatorSpec::Sum);
        let arrivals = vec![ArrivalProcess::Deterministic { count: 3 }; 2];
        let qos = QosSetup {
            frame_len: 4,
            classes: vec![TrafficClass::BestEffort; 2],
        };
        let env = environment(&spec, arrivals, Policy::QosMaxWeight, Some(qos));
        let mut sim = Simulator::new(&env).unwrap();
        let mut state = SystemState::new(2);
        let mut rng = ReplicationRng::new(1, 0);
        let f = sim.step_frame(&mut state, &mut rng).unwrap();
        assert_eq!(f.slots.len(), 4);
        assert_eq!(f.slots[0].arrivals, vec![3, 3]);
        assert!(f.slots[1..].iter().all(|s| s.arrivals == vec![0, 0]));
        let delivered: u64 = f.frame_service.iter().sum();
        assert_eq!(state.backlog.iter().sum::<u64>() + delivered, 6);
    }

    #[test]
    fn real_time_buffer_drops_leftovers() {
        // One always-OFF channel: nothing is ever delivered.
        let spec = ModelSpec::symmetric(1, 1, vec![0, 1], vec![1.0, 0.0], EstimatorSpec::Sum);
        let qos = QosSetup {
            frame_len: 5,
            classes: vec![TrafficClass::RealTime { drop_ratio: 0.01 }],
        };
        let env = environment(
            &spec,
            vec![ArrivalProcess::Deterministic { count: 10 }],
            Policy::QosMaxWeight,
            Some(qos),
        );
        let mut sim = Simulator::new(&env).unwrap();
        let mut state = SystemState::new(1);
        let mut rng = ReplicationRng::new(1, 0);
        let f = sim.step_frame(&mut state, &mut rng).unwrap();
        assert_eq!(f.drops, vec![10]);
        assert!((state.virtual_backlog[0] - 9.9).abs() < 1e-12);
        assert_eq!(state.backlog, vec![0]);
    }
}
