//! Helpers shared by the integration suites: seeded random models and a
//! brute-force region oracle that never touches the library's statistics code.

#![allow(dead_code)]

use std::collections::BTreeMap;

use fadesched::channel::{EstimatorSpec, ModelSpec};
use rand::seq::index::sample;
use rand::Rng;

/// Random model with `users` users and `channels` channels. States are 0 plus
/// one or two distinct values in 1..=5; feedback is a sum or a rounded average.
pub fn random_model<R: Rng>(rng: &mut R, users: usize, channels: usize) -> ModelSpec {
    let extra = rng.random_range(1..=2);
    let mut space: Vec<u32> = sample(rng, 5, extra).into_iter().map(|v| v as u32 + 1).collect();
    space.push(0);
    space.sort_unstable();
    let estimator = match rng.random_range(0..3) {
        0 => EstimatorSpec::Sum,
        1 => EstimatorSpec::AvgFloor,
        _ => EstimatorSpec::AvgCeil,
    };
    let marginals = (0..users)
        .map(|_| (0..channels).map(|_| random_pmf(rng, space.len())).collect())
        .collect();
    ModelSpec {
        users,
        channels,
        state_space: space,
        marginals,
        estimator,
    }
}

/// Pmf with every entry at least 0.05.
pub fn random_pmf<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| 0.05 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

fn symbol_of(estimator: &EstimatorSpec, x: &[u32]) -> u64 {
    let sum: u64 = x.iter().map(|&v| u64::from(v)).sum();
    let m = x.len() as u64;
    match estimator {
        EstimatorSpec::Sum => sum,
        EstimatorSpec::AvgFloor => sum / m,
        EstimatorSpec::AvgCeil => sum.div_ceil(m),
        other => panic!("oracle does not handle {other:?}"),
    }
}

/// Per-user table `symbol -> (probability, vertex rate)`, computed by listing
/// every state vector of the user.
pub fn brute_vertex_rates(spec: &ModelSpec) -> Vec<BTreeMap<u64, (f64, f64)>> {
    let space = &spec.state_space;
    let k = space.len();
    let m = spec.channels;
    (0..spec.users)
        .map(|i| {
            // symbol -> (P(S = s), P(X_j >= x_l, S = s) for every j, l)
            let mut acc: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
            let total = k.pow(m as u32);
            for code in 0..total {
                let mut rest = code;
                let idx: Vec<usize> = (0..m)
                    .map(|_| {
                        let v = rest % k;
                        rest /= k;
                        v
                    })
                    .collect();
                let x: Vec<u32> = idx.iter().map(|&l| space[l]).collect();
                let p: f64 = idx
                    .iter()
                    .enumerate()
                    .map(|(j, &l)| spec.marginals[i][j][l])
                    .product();
                let entry = acc
                    .entry(symbol_of(&spec.estimator, &x))
                    .or_insert_with(|| (0.0, vec![0.0; m * k]));
                entry.0 += p;
                for j in 0..m {
                    for l in 0..=idx[j] {
                        entry.1[j * k + l] += p;
                    }
                }
            }
            acc.into_iter()
                .filter(|(_, (p, _))| *p > 0.0)
                .map(|(s, (p, joint))| {
                    let c: f64 = (0..m)
                        .map(|j| {
                            (0..k)
                                .map(|l| f64::from(space[l]) * joint[j * k + l] / p)
                                .fold(0.0, f64::max)
                        })
                        .sum();
                    (s, (p, c))
                })
                .collect()
        })
        .collect()
}

/// Joint estimates as (probability, per-user vertex rates).
pub fn joint_support(tables: &[BTreeMap<u64, (f64, f64)>]) -> Vec<(f64, Vec<f64>)> {
    let mut out = vec![(1.0, Vec::new())];
    for table in tables {
        out = out
            .into_iter()
            .flat_map(|(p, c)| {
                table.values().map(move |&(q, r)| {
                    let mut c = c.clone();
                    c.push(r);
                    (p * q, c)
                })
            })
            .collect();
    }
    out
}

/// `h(w) = E[max(0, max_i w_i c_i(S_i))]`, the support function of the region.
pub fn support(joint: &[(f64, Vec<f64>)], w: &[f64]) -> f64 {
    joint
        .iter()
        .map(|(p, c)| p * c.iter().zip(w).map(|(ci, wi)| ci * wi).fold(0.0, f64::max))
        .sum()
}

/// Optimal uniform slack by duality: the minimum over the weight simplex of
/// `h(w) - w . lambda`, found by a coarse grid refined around its best point.
pub fn grid_epsilon(joint: &[(f64, Vec<f64>)], lambda: &[f64]) -> f64 {
    let n = lambda.len();
    let f = |w: &[f64]| support(joint, w) - w.iter().zip(lambda).map(|(a, b)| a * b).sum::<f64>();
    match n {
        1 => f(&[1.0]),
        2 => {
            let g = |a: f64| f(&[a, 1.0 - a]);
            let (mut best, mut step) = (0.5, 1.0_f64 / 400.0);
            let mut lo = 0.0_f64;
            let mut hi = 1.0;
            for _ in 0..5 {
                let count = ((hi - lo) / step).round() as usize;
                best = (0..=count)
                    .map(|t| (lo + t as f64 * step).clamp(0.0, 1.0))
                    .min_by(|a, b| g(*a).total_cmp(&g(*b)))
                    .unwrap();
                lo = (best - 2.0 * step).max(0.0);
                hi = (best + 2.0 * step).min(1.0);
                step /= 10.0;
            }
            g(best)
        }
        3 => {
            let g = |a: f64, b: f64| f(&[a, b, (1.0 - a - b).max(0.0)]);
            let mut best = (1.0 / 3.0, 1.0 / 3.0);
            let mut step = 1.0_f64 / 200.0;
            let (mut alo, mut ahi, mut blo, mut bhi) = (0.0_f64, 1.0_f64, 0.0_f64, 1.0_f64);
            for _ in 0..4 {
                let na = ((ahi - alo) / step).round() as usize;
                let nb = ((bhi - blo) / step).round() as usize;
                let mut val = f64::INFINITY;
                for ta in 0..=na {
                    let a = (alo + ta as f64 * step).clamp(0.0, 1.0);
                    for tb in 0..=nb {
                        let b = (blo + tb as f64 * step).clamp(0.0, 1.0 - a);
                        let v = g(a, b);
                        if v < val {
                            val = v;
                            best = (a, b);
                        }
                    }
                }
                alo = (best.0 - 3.0 * step).max(0.0);
                ahi = (best.0 + 3.0 * step).min(1.0);
                blo = (best.1 - 3.0 * step).max(0.0);
                bhi = (best.1 + 3.0 * step).min(1.0);
                step /= 10.0;
            }
            g(best.0, best.1)
        }
        _ => panic!("grid oracle handles at most three users"),
    }
}
