//! Closed-form and brute-force oracles for the region, delay and queue code.

mod common;

use std::sync::Arc;

use fadesched::arrivals::ArrivalProcess;
use fadesched::channel::{EstimatorSpec, ModelSpec};
use fadesched::dynamics::{run, Environment, RunConfig};
use fadesched::experiment::{on_off_model, two_channel_model};
use fadesched::metrics::little_delay;
use fadesched::policy::Policy;
use fadesched::region::{boundary_scale, delay_bound, membership, stat_service, Verdict};
use fadesched::stats::derive_all;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_vertex_rates, grid_epsilon, joint_support, random_model};

fn binomial_cdf(n: u64, p: f64, k: u64) -> f64 {
    (0..=k)
        .map(|j| {
            let choose = (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
            choose * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32)
        })
        .sum()
}

#[test]
fn on_off_capacity_is_the_mean_best_channel_count() {
    // With sum feedback on ON/OFF channels the best user always gets every
    // channel, so the symmetric capacity is E[max of 10 Binomial(6, 1/2)].
    let expected_max: f64 = (0..6).map(|k| 1.0 - binomial_cdf(6, 0.5, k).powi(10)).sum();
    let stats = derive_all(&on_off_model().build().unwrap()).unwrap();
    let per_user = boundary_scale(&[1.0; 10], &stats).unwrap();
    assert!((per_user * 10.0 - expected_max).abs() < 1e-6, "{per_user} vs {expected_max}");
    assert!((expected_max - 4.8169).abs() < 1e-4);
}

#[test]
fn worked_example_region_and_delay_bound() {
    let stats = derive_all(&two_channel_model().build().unwrap()).unwrap();
    assert!((boundary_scale(&[1.0], &stats).unwrap() - 4.0).abs() < 1e-6);

    // Bernoulli(1/2): E[A] = E[A^2] = 1/2, mu = 4, rho = 1/8,
    // K = (2 * 6)^2 / (1/2) = 288, bound = 289 * 0.5 / (2 * 4 * 7/8 * 0.5).
    let d = delay_bound(&[ArrivalProcess::Bernoulli { mean: 0.5 }], &stats).unwrap();
    assert!((d.inputs.mu - 4.0).abs() < 1e-12);
    assert!((d.inputs.rho - 0.125).abs() < 1e-6);
    assert!((d.inputs.k - 288.0).abs() < 1e-9);
    assert!((d.bound - 289.0 * 0.5 / 3.5).abs() < 1e-3, "{}", d.bound);
}

#[test]
fn uniform_slack_matches_the_dual_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 15 {
        let users = rng.random_range(1..=3);
        let channels = rng.random_range(1..=3);
        let spec = random_model(&mut rng, users, channels);
        let stats = derive_all(&spec.build().unwrap()).unwrap();
        if stats.iter().any(|s| s.rows().len() > 8) {
            continue;
        }
        checked += 1;
        let joint = joint_support(&brute_vertex_rates(&spec));
        let lambda: Vec<f64> = stats
            .iter()
            .map(|s| rng.random_range(0.0..2.0) * s.mean_vertex_rate() / users as f64)
            .collect();
        let cert = membership(&lambda, &stats).unwrap();
        let oracle = grid_epsilon(&joint, &lambda);
        assert!((cert.epsilon - oracle).abs() < 2e-3, "{} vs {oracle}", cert.epsilon);
    }
}

#[test]
fn brute_force_vertex_rates_agree_with_derived_stats() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let spec = random_model(&mut rng, 2, 3);
        let stats = derive_all(&spec.build().unwrap()).unwrap();
        for (st, table) in stats.iter().zip(brute_vertex_rates(&spec)) {
            assert_eq!(st.rows().len(), table.len());
            for row in st.rows() {
                let (p, c) = table[&row.symbol];
                assert!((row.prob - p).abs() < 1e-12);
                assert!((row.vertex_rate() - c).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn deterministic_unit_service_has_unit_delay() {
    // One packet arrives and one leaves every slot: the backlog seen at each
    // slot start is exactly one packet.
    let spec = ModelSpec::symmetric(1, 1, vec![0, 1], vec![0.0, 1.0], EstimatorSpec::Exact);
    let models = spec.build().unwrap();
    let stats = derive_all(&models).unwrap();
    let env = Environment::new(
        Arc::new(models),
        Arc::new(stats),
        vec![ArrivalProcess::Deterministic { count: 1 }],
        Policy::MaxWeight,
        None,
    )
    .unwrap();
    let log = run(&env, &RunConfig::new(1_000, 3)).unwrap();
    assert_eq!(log.mean_total_backlog, 1.0);
    assert_eq!(little_delay(&log).unwrap(), 1.0);
}

#[test]
fn stat_delivers_its_certified_service_when_saturated() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let spec = random_model(&mut rng, 3, 2);
    let models = spec.build().unwrap();
    let stats = derive_all(&models).unwrap();
    let lambda: Vec<f64> = stats.iter().map(|s| 0.25 * s.mean_vertex_rate()).collect();
    let cert = membership(&lambda, &stats).unwrap();
    assert_eq!(cert.verdict, Verdict::Inside);
    let expected = stat_service(&cert.gamma, &stats).unwrap();
    for (e, c) in expected.iter().zip(&cert.service) {
        assert!((e - c).abs() < 1e-9);
    }

    let env = Environment::new(
        Arc::new(models),
        Arc::new(stats),
        vec![ArrivalProcess::Zero; 3],
        Policy::Stat(Arc::new(cert.gamma)),
        None,
    )
    .unwrap();
    let mut cfg = RunConfig::new(200_000, 5);
    cfg.initial_backlog = vec![1_000_000_000; 3];
    let log = run(&env, &cfg).unwrap();
    for (got, want) in log.throughput.iter().zip(&expected) {
        assert!((got - want).abs() < 0.05 + 0.02 * want, "{got} vs {want}");
    }
}
