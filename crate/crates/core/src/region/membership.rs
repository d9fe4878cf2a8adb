//! Membership of an arrival-rate vector in the stability region.
//!
//! The region is the set of mean service vectors of stationary rules that,
//! for each joint estimate `s`, give every channel to user `i` with
//! probability `gamma^s_i`. Membership maximises the uniform slack `eps` with
//! `lambda_i + eps <= sum_s P(s) gamma^s_i c_i(s)`.
//!
//! Two exact formulations are available. The joint-table LP has one variable
//! per (joint estimate, user) and is used when the joint estimate space is
//! small. Otherwise the same LP is solved over mixtures of priority-rule
//! vertices, adding the best vertex for the current dual prices until no
//! vertex improves the objective.

use std::collections::BTreeMap;

use serde::Serialize;

use super::lp::{self, LpError};
use super::support::{support, RateDistribution};
use crate::error::{Error, Result};
use crate::policy::{PriorityComponent, StatWeights};
use crate::stats::ConditionalStats;

/// `|eps|` below this counts as the boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Largest `N * prod_i |S_i|` solved with the joint-table formulation.
pub const JOINT_TABLE_LIMIT: usize = 1024;

const PRICING_TOLERANCE: f64 = 1e-11;
const MAX_GENERATED_VERTICES: usize = 5_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Inside,
    Boundary,
    Outside,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    JointTable,
    VertexMixture,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionCertificate {
    pub verdict: Verdict,
    /// Optimal uniform slack (negative outside).
    pub epsilon: f64,
    /// Stationary weights attaining `epsilon`.
    pub gamma: StatWeights,
    /// Mean service vector of `gamma`.
    pub service: Vec<f64>,
    /// Normalised dual prices of the rate constraints. Outside the region,
    /// `alpha . lambda > max_u alpha . u` over the region.
    pub alpha: Vec<f64>,
    pub formulation: Formulation,
}

fn verdict_for(epsilon: f64) -> Verdict {
    if epsilon > BOUNDARY_TOLERANCE {
        Verdict::Inside
    } else if epsilon < -BOUNDARY_TOLERANCE {
        Verdict::Outside
    } else {
        Verdict::Boundary
    }
}

fn check_rates(lambda: &[f64], stats: &[ConditionalStats]) -> Result<()> {
    if stats.is_empty() {
        return Err(Error::DegenerateStats("no users".into()));
    }
    if lambda.len() != stats.len() {
        return Err(Error::InvalidConfig(format!(
            "rate vector has {} entries for {} users",
            lambda.len(),
            stats.len()
        )));
    }
    if lambda.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidConfig(
            "arrival rates must be finite and non-negative".into(),
        ));
    }
    for st in stats {
        st.validate()?;
    }
    Ok(())
}

fn normalise(mut y: Vec<f64>) -> Vec<f64> {
    let total: f64 = y.iter().sum();
    if total > 0.0 {
        y.iter_mut().for_each(|v| *v /= total);
    }
    y
}

/// Number of joint estimates, or `None` on overflow.
fn joint_size(stats: &[ConditionalStats]) -> Option<usize> {
    stats
        .iter()
        .try_fold(1usize, |acc, st| acc.checked_mul(st.rows().len()))
}

/// Formulation chosen by [`membership`] for these statistics.
pub fn default_formulation(stats: &[ConditionalStats]) -> Formulation {
    match joint_size(stats).and_then(|j| j.checked_mul(stats.len())) {
        Some(vars) if vars <= JOINT_TABLE_LIMIT => Formulation::JointTable,
        _ => Formulation::VertexMixture,
    }
}

pub fn membership(lambda: &[f64], stats: &[ConditionalStats]) -> Result<RegionCertificate> {
    RegionSolver::new(stats)?.membership(lambda)
}

pub fn membership_with(
    lambda: &[f64],
    stats: &[ConditionalStats],
    formulation: Formulation,
) -> Result<RegionCertificate> {
    RegionSolver::with_formulation(stats, formulation)?.membership(lambda)
}

/// Largest `theta` with `theta * direction` inside or on the boundary.
pub fn boundary_scale(direction: &[f64], stats: &[ConditionalStats]) -> Result<f64> {
    RegionSolver::new(stats)?.boundary_offset(&vec![0.0; direction.len()], direction)
}

/// Stationary weights supporting `lambda` with the largest uniform slack.
pub fn stat_weights(lambda: &[f64], stats: &[ConditionalStats]) -> Result<StatWeights> {
    let cert = membership(lambda, stats)?;
    match cert.verdict {
        Verdict::Inside => Ok(cert.gamma),
        _ => Err(Error::NotInRegion {
            epsilon: cert.epsilon,
        }),
    }
}

/// Mean service vector `u_i = sum_s P(s) gamma^s_i c_i(s)` of a STAT policy.
pub fn stat_service(gamma: &StatWeights, stats: &[ConditionalStats]) -> Result<Vec<f64>> {
    let n = stats.len();
    if gamma.users() != n {
        return Err(Error::InvalidStatWeights(format!(
            "weights for {} users applied to {n} users",
            gamma.users()
        )));
    }
    let mut u = vec![0.0; n];
    if let Some(table) = gamma.table_entries() {
        for (s, g) in table {
            let mut p = 1.0;
            let mut rates = Vec::with_capacity(n);
            for (&sym, st) in s.iter().zip(stats) {
                let row = st.row(sym)?;
                p *= row.prob;
                rates.push(row.vertex_rate());
            }
            for i in 0..n {
                u[i] += p * g[i] * rates[i];
            }
        }
    } else if let Some(components) = gamma.components() {
        let dists: Vec<RateDistribution> = stats.iter().map(RateDistribution::new).collect();
        for c in components {
            let (_, v) = support(&c.priorities, &dists);
            for i in 0..n {
                u[i] += c.weight * v[i];
            }
        }
    }
    Ok(u)
}

struct Column {
    priorities: Vec<f64>,
    service: Vec<f64>,
}

/// Reusable solver; generated vertices are kept across calls.
pub struct RegionSolver<'a> {
    stats: &'a [ConditionalStats],
    formulation: Formulation,
    dists: Vec<RateDistribution>,
    columns: Vec<Column>,
}

impl<'a> RegionSolver<'a> {
    pub fn new(stats: &'a [ConditionalStats]) -> Result<Self> {
        Self::with_formulation(stats, default_formulation(stats))
    }

    pub fn with_formulation(stats: &'a [ConditionalStats], formulation: Formulation) -> Result<Self> {
        if stats.is_empty() {
            return Err(Error::DegenerateStats("no users".into()));
        }
        for st in stats {
            st.validate()?;
        }
        if formulation == Formulation::JointTable
            && joint_size(stats)
                .and_then(|j| j.checked_mul(stats.len()))
                .is_none_or(|v| v > 16 * JOINT_TABLE_LIMIT)
        {
            return Err(Error::InvalidConfig(
                "joint estimate space too large for the joint-table formulation".into(),
            ));
        }
        let dists: Vec<RateDistribution> = stats.iter().map(RateDistribution::new).collect();
        let n = stats.len();
        let columns = (0..n)
            .map(|i| {
                let mut priorities = vec![0.0; n];
                priorities[i] = 1.0;
                let mut service = vec![0.0; n];
                service[i] = dists[i].mean();
                Column {
                    priorities,
                    service,
                }
            })
            .collect();
        Ok(Self {
            stats,
            formulation,
            dists,
            columns,
        })
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    /// `E[c_i(S_i)]` per user: the most service each user can get alone.
    pub fn max_service(&self) -> Vec<f64> {
        self.dists.iter().map(RateDistribution::mean).collect()
    }

    pub fn membership(&mut self, lambda: &[f64]) -> Result<RegionCertificate> {
        check_rates(lambda, self.stats)?;
        match self.formulation {
            Formulation::JointTable => self.joint_table(lambda),
            Formulation::VertexMixture => self.vertex_mixture(lambda),
        }
    }

    /// Largest `theta >= 0` with `base + theta * direction` inside or on the
    /// boundary, by bisection. Errors if `base` itself is outside.
    pub fn boundary_offset(&mut self, base: &[f64], direction: &[f64]) -> Result<f64> {
        check_rates(base, self.stats)?;
        if direction.len() != base.len()
            || direction.iter().any(|d| !d.is_finite() || *d < 0.0)
            || direction.iter().all(|d| *d == 0.0)
        {
            return Err(Error::InvalidConfig(
                "direction must be non-negative, finite and non-zero".into(),
            ));
        }
        let at = |theta: f64| -> Vec<f64> {
            base.iter().zip(direction).map(|(b, d)| b + theta * d).collect()
        };
        let base_cert = self.membership(base)?;
        if base_cert.verdict == Verdict::Outside {
            return Err(Error::NotInRegion {
                epsilon: base_cert.epsilon,
            });
        }
        let caps = self.max_service();
        let mut hi = f64::INFINITY;
        for i in 0..base.len() {
            if direction[i] > 0.0 {
                hi = hi.min(((caps[i] - base[i]) / direction[i]).max(0.0));
            }
        }
        if hi == 0.0 || self.membership(&at(hi))?.verdict != Verdict::Outside {
            return Ok(hi);
        }
        let mut lo = 0.0;
        let width = hi;
        // Relative stopping rule so that scaling the direction by a power of
        // two visits exactly the scaled points.
        while hi - lo > 1e-9 * width || hi - lo > 1e-7 {
            let mid = 0.5 * (lo + hi);
            if self.membership(&at(mid))?.verdict == Verdict::Outside {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(lo)
    }

    fn joint_table(&mut self, lambda: &[f64]) -> Result<RegionCertificate> {
        let stats = self.stats;
        let n = stats.len();
        let lmax = lambda.iter().cloned().fold(0.0, f64::max);

        // Enumerate joint estimates in mixed radix, user 0 fastest.
        let sizes: Vec<usize> = stats.iter().map(|s| s.rows().len()).collect();
        let joint = sizes.iter().product::<usize>();
        let mut symbols = Vec::with_capacity(joint);
        let mut probs = Vec::with_capacity(joint);
        let mut rates = Vec::with_capacity(joint);
        let mut idx = vec![0usize; n];
        for _ in 0..joint {
            let rows: Vec<_> = (0..n).map(|i| &stats[i].rows()[idx[i]]).collect();
            symbols.push(rows.iter().map(|r| r.symbol).collect::<Vec<u64>>());
            probs.push(rows.iter().map(|r| r.prob).product::<f64>());
            rates.push(rows.iter().map(|r| r.vertex_rate()).collect::<Vec<f64>>());
            for (u, size) in sizes.iter().enumerate() {
                idx[u] += 1;
                if idx[u] < *size {
                    break;
                }
                idx[u] = 0;
            }
        }

        // Variables: gamma for (s, i) with positive contribution, then e = eps + lmax.
        let mut var_of = Vec::new();
        for s in 0..joint {
            for i in 0..n {
                if probs[s] * rates[s][i] > 0.0 {
                    var_of.push((s, i));
                }
            }
        }
        let nv = var_of.len() + 1;
        let e = nv - 1;
        let mut a = vec![vec![0.0; nv]; n + joint];
        let mut b = vec![0.0; n + joint];
        for i in 0..n {
            a[i][e] = 1.0;
            b[i] = lmax - lambda[i];
        }
        for (v, &(s, i)) in var_of.iter().enumerate() {
            a[i][v] = -probs[s] * rates[s][i];
            a[n + s][v] = 1.0;
        }
        for bs in b.iter_mut().skip(n) {
            *bs = 1.0;
        }
        let mut c = vec![0.0; nv];
        c[e] = 1.0;
        let sol = lp::maximize(&c, &a, &b)?;

        let epsilon = sol.x[e] - lmax;
        let mut table: BTreeMap<Vec<u64>, Vec<f64>> = symbols
            .iter()
            .map(|s| (s.clone(), vec![0.0; n]))
            .collect();
        for (v, &(s, i)) in var_of.iter().enumerate() {
            table.get_mut(&symbols[s]).unwrap()[i] = sol.x[v].min(1.0);
        }
        let gamma = StatWeights::table(n, table)?;
        let service = stat_service(&gamma, stats)?;
        Ok(RegionCertificate {
            verdict: verdict_for(epsilon),
            epsilon,
            gamma,
            service,
            alpha: normalise(sol.duals[..n].to_vec()),
            formulation: Formulation::JointTable,
        })
    }

    fn vertex_mixture(&mut self, lambda: &[f64]) -> Result<RegionCertificate> {
        let n = self.stats.len();
        let lmax = lambda.iter().cloned().fold(0.0, f64::max);
        let mut generated = 0;
        loop {
            let k = self.columns.len();
            let e = k;
            let mut a = vec![vec![0.0; k + 1]; n + 1];
            let mut b = vec![0.0; n + 1];
            for i in 0..n {
                for (col, column) in self.columns.iter().enumerate() {
                    a[i][col] = -column.service[i];
                }
                a[i][e] = 1.0;
                b[i] = lmax - lambda[i];
            }
            for col in 0..k {
                a[n][col] = 1.0;
            }
            b[n] = 1.0;
            let mut c = vec![0.0; k + 1];
            c[e] = 1.0;
            let sol = lp::maximize(&c, &a, &b)?;

            let y = sol.duals[..n].to_vec();
            let z = sol.duals[n];
            let (h, v) = support(&y, &self.dists);
            let improves = h - z > PRICING_TOLERANCE * (1.0 + z.abs());
            let duplicate = self.columns.iter().any(|col| {
                col.service
                    .iter()
                    .zip(&v)
                    .all(|(p, q)| (p - q).abs() <= 1e-14 * (1.0 + p.abs()))
            });
            if !improves || duplicate {
                let epsilon = sol.x[e] - lmax;
                let mut components = Vec::new();
                let mut service = vec![0.0; n];
                for (col, column) in self.columns.iter().enumerate() {
                    let eta = sol.x[col].min(1.0);
                    if eta > 0.0 {
                        for i in 0..n {
                            service[i] += eta * column.service[i];
                        }
                        components.push(PriorityComponent {
                            weight: eta,
                            priorities: column.priorities.clone(),
                        });
                    }
                }
                let gamma = StatWeights::mixture(n, components)?;
                // Keep the single-user vertices and the optimal basis so the
                // next call (usually a nearby rate vector) starts small.
                let mut col = 0;
                self.columns.retain(|_| {
                    let keep = col < n || sol.x[col] > 0.0;
                    col += 1;
                    keep
                });
                return Ok(RegionCertificate {
                    verdict: verdict_for(epsilon),
                    epsilon,
                    gamma,
                    service,
                    alpha: normalise(y),
                    formulation: Formulation::VertexMixture,
                });
            }
            generated += 1;
            if generated > MAX_GENERATED_VERTICES {
                return Err(LpError::IterationLimit(MAX_GENERATED_VERTICES).into());
            }
            self.columns.push(Column {
                priorities: y,
                service: v,
            });
        }
    }
}
