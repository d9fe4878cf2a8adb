use std::io::Write;

use rayon::prelude::*;

use crate::dynamics::{run, Environment, RunConfig, TrafficClass};
use crate::error::{Error, Result};
use crate::metrics::{little_delay, MetricsLog};

use super::config::Prepared;

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub config_id: usize,
    pub policy: String,
    pub lambda: f64,
    pub seed: u64,
    pub horizon: u64,
    pub metrics: MetricsLog,
}

#[derive(Clone, Copy, Debug)]
struct Task {
    config_id: usize,
    point: usize,
    policy: usize,
    seed: u64,
}

fn run_task(prepared: &Prepared, task: Task, horizon: u64) -> Result<SweepRow> {
    let config = &prepared.config;
    let mean = config.arrivals.means[task.point];
    let spec = &config.policies[task.policy];
    let env = Environment::new(
        prepared.models.clone(),
        prepared.stats.clone(),
        prepared.arrivals_at(mean)?,
        prepared.policy_at(spec, mean)?,
        prepared.qos.clone(),
    )?;
    let mut run_config = RunConfig::new(horizon, task.seed);
    run_config.warmup_fraction = config.warmup_fraction;
    // The stream depends on the sweep point only, so every policy at a point
    // sees the same channel and arrival realisations.
    run_config.stream = task.point as u64;
    if let Some(q) = config.initial_backlog {
        run_config.initial_backlog = vec![q; prepared.users()];
    }
    let metrics = run(&env, &run_config)?;
    Ok(SweepRow {
        config_id: task.config_id,
        policy: spec.name().to_string(),
        lambda: mean,
        seed: task.seed,
        horizon,
        metrics,
    })
}

/// Runs every (sweep value, policy, seed) combination on `jobs` threads.
/// Rows come back in that order whatever the thread count.
pub fn run_sweep(prepared: &Prepared, horizon: Option<u64>, jobs: usize) -> Result<Vec<SweepRow>> {
    let config = &prepared.config;
    let horizon = horizon.unwrap_or(config.horizon);
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least one slot".into()));
    }
    let mut tasks = Vec::new();
    for point in 0..config.arrivals.means.len() {
        for policy in 0..config.policies.len() {
            for &seed in &config.seeds {
                tasks.push(Task {
                    config_id: tasks.len(),
                    point,
                    policy,
                    seed,
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&t| run_task(prepared, t, horizon))
            .collect()
    })
}

fn header(prepared: &Prepared) -> (Vec<String>, Vec<usize>, Vec<usize>) {
    let n = prepared.users();
    let mut rt = Vec::new();
    let mut rg = Vec::new();
    if let Some(q) = &prepared.qos {
        for (i, c) in q.classes.iter().enumerate() {
            match c {
                TrafficClass::RealTime { .. } => rt.push(i),
                TrafficClass::RateGuaranteed { .. } => rg.push(i),
                TrafficClass::BestEffort => {}
            }
        }
    }
    let mut h: Vec<String> = ["config_id", "policy", "lambda", "seed", "horizon", "mean_total_backlog"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=n).map(|i| format!("backlog_{i}")));
    h.extend((1..=n).map(|i| format!("throughput_{i}")));
    h.push("little_delay".into());
    h.extend(rt.iter().map(|i| format!("rt_drop_ratio_{}", i + 1)));
    h.extend(rg.iter().map(|i| format!("rg_rate_{}", i + 1)));
    h.push("divergent".into());
    (h, rt, rg)
}

/// Writes one CSV row per sweep row; the header is always emitted.
pub fn write_csv<W: Write>(prepared: &Prepared, rows: &[SweepRow], out: W) -> Result<()> {
    let (head, rt, rg) = header(prepared);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&head)?;
    for r in rows {
        let m = &r.metrics;
        let mut rec = vec![
            r.config_id.to_string(),
            r.policy.clone(),
            r.lambda.to_string(),
            r.seed.to_string(),
            r.horizon.to_string(),
            m.mean_total_backlog.to_string(),
        ];
        rec.extend(m.mean_backlog.iter().map(f64::to_string));
        rec.extend(m.throughput.iter().map(f64::to_string));
        rec.push(little_delay(m).map(|d| d.to_string()).unwrap_or_default());
        rec.extend(rt.iter().map(|&i| m.rt_drop_ratio[i].unwrap_or(0.0).to_string()));
        rec.extend(rg.iter().map(|&i| m.rg_rate[i].as_ref().map_or(0.0, |r| r.mean).to_string()));
        rec.push(m.divergent.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))?;
    Ok(())
}
