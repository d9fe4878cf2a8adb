//! Conditional channel statistics seen by the scheduler.
//!
//! For each reachable estimate symbol `s` of a user we keep `P(S = s)` and the
//! conditional tail `P(X_j >= x | S = s)` for every channel `j` and state `x`.
//! The goodput-maximising rate `r*_j(s)` and the vertex rate
//! `c(s) = sum_j P(X_j >= r*_j(s) | s) r*_j(s)` are precomputed per row.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{StateSpace, SymbolPmf, UserChannelModel};
use crate::error::{Error, Result};

/// Relative gap below which two scores are treated as tied.
pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

/// `true` when `candidate` strictly beats `incumbent` beyond the tie tolerance.
#[inline]
pub(crate) fn beats(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + TIE_TOLERANCE * incumbent.abs()
}

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Transmission rate on one channel and its conditional success probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateChoice {
    pub rate: u32,
    pub success_prob: f64,
}

impl RateChoice {
    pub fn goodput(&self) -> f64 {
        self.success_prob * self.rate as f64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateRow {
    pub symbol: u64,
    pub prob: f64,
    /// `ccdf[j * |X| + k] = P(X_j >= x_k | S = symbol)`.
    ccdf: Vec<f64>,
    best: Vec<RateChoice>,
    vertex_rate: f64,
}

impl EstimateRow {
    pub fn best(&self) -> &[RateChoice] {
        &self.best
    }

    pub fn vertex_rate(&self) -> f64 {
        self.vertex_rate
    }
}

/// Estimate pmf and conditional tail tables of one user.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionalStats {
    user: usize,
    space: StateSpace,
    channels: usize,
    rows: Vec<EstimateRow>,
    #[serde(skip)]
    index: BTreeMap<u64, usize>,
}

/// Mass accumulated for one symbol: total and per (channel, state).
struct SymbolMass {
    total: f64,
    per_state: Vec<f64>,
}

impl ConditionalStats {
    fn from_masses(
        user: usize,
        space: StateSpace,
        channels: usize,
        masses: BTreeMap<u64, SymbolMass>,
    ) -> Result<Self> {
        let k = space.len();
        let total: f64 = masses.values().map(|m| m.total).sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateStats(format!("user {user}: no estimate mass")));
        }
        let mut rows = Vec::with_capacity(masses.len());
        for (symbol, mass) in masses {
            if mass.total <= 0.0 {
                continue;
            }
            let mut ccdf = vec![0.0; channels * k];
            for j in 0..channels {
                let mut tail = 0.0;
                for idx in (0..k).rev() {
                    tail += mass.per_state[j * k + idx];
                    ccdf[j * k + idx] = (tail / mass.total).clamp(0.0, 1.0);
                }
            }
            let best: Vec<RateChoice> = (0..channels)
                .map(|j| goodput_argmax(&space, &ccdf[j * k..(j + 1) * k]))
                .collect();
            let vertex_rate = best.iter().map(RateChoice::goodput).sum();
            rows.push(EstimateRow {
                symbol,
                prob: mass.total / total,
                ccdf,
                best,
                vertex_rate,
            });
        }
        let index = rows.iter().enumerate().map(|(r, row)| (row.symbol, r)).collect();
        let stats = Self {
            user,
            space,
            channels,
            rows,
            index,
        };
        stats.validate()?;
        Ok(stats)
    }

    /// Checks the table invariants: pmf normalisation and monotone tails in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.rows.iter().map(|r| r.prob).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::DegenerateStats(format!(
                "user {}: estimate pmf sums to {total}",
                self.user
            )));
        }
        let k = self.space.len();
        for row in &self.rows {
            if !(row.prob > 0.0) {
                return Err(Error::DegenerateStats(format!(
                    "user {}: symbol {} has non-positive probability",
                    self.user, row.symbol
                )));
            }
            for j in 0..self.channels {
                let tail = &row.ccdf[j * k..(j + 1) * k];
                if tail.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::DegenerateStats(format!(
                        "user {}: tail probability outside [0, 1]",
                        self.user
                    )));
                }
                if tail.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::DegenerateStats(format!(
                        "user {}: tail of channel {j} given {} is not monotone",
                        self.user, row.symbol
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn user(&self) -> usize {
        self.user
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn rows(&self) -> &[EstimateRow] {
        &self.rows
    }

    /// Reachable symbols with their probabilities, in increasing symbol order.
    pub fn estimate_pmf(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.rows.iter().map(|r| (r.symbol, r.prob))
    }

    pub fn row(&self, symbol: u64) -> Result<&EstimateRow> {
        self.index
            .get(&symbol)
            .map(|&r| &self.rows[r])
            .ok_or(Error::UnknownEstimate {
                user: self.user,
                symbol,
            })
    }

    /// `P(X_j >= x | S = symbol)`; `x` need not be a state (0 beyond `x_max`).
    pub fn ccdf(&self, channel: usize, symbol: u64, x: u32) -> Result<f64> {
        let row = self.row(symbol)?;
        Ok(self.ccdf_in_row(row, channel, x))
    }

    pub(crate) fn ccdf_in_row(&self, row: &EstimateRow, channel: usize, x: u32) -> f64 {
        let k = self.space.len();
        match self.space.first_at_least(x) {
            Some(idx) => row.ccdf[channel * k + idx],
            None => 0.0,
        }
    }

    /// Goodput-maximising rate on `channel` given `symbol`, smallest rate on ties.
    pub fn r_star(&self, channel: usize, symbol: u64) -> Result<RateChoice> {
        Ok(self.row(symbol)?.best[channel])
    }

    /// `c(s)`: expected packets delivered when this user gets every channel.
    pub fn vertex_rate(&self, symbol: u64) -> Result<f64> {
        Ok(self.row(symbol)?.vertex_rate)
    }

    /// `E[c(S)]`, the largest mean service this user can ever receive.
    pub fn mean_vertex_rate(&self) -> f64 {
        self.rows.iter().map(|r| r.prob * r.vertex_rate).sum()
    }
}

fn goodput_argmax(space: &StateSpace, tail: &[f64]) -> RateChoice {
    let mut best = RateChoice {
        rate: space.values()[0],
        success_prob: tail[0],
    };
    for (k, &x) in space.values().iter().enumerate().skip(1) {
        let candidate = RateChoice {
            rate: x,
            success_prob: tail[k],
        };
        if beats(candidate.goodput(), best.goodput()) {
            best = candidate;
        }
    }
    best
}

/// Exact tables by enumerating every joint state vector of the user.
pub fn derive_conditional_stats(model: &UserChannelModel) -> Result<ConditionalStats> {
    let m = model.channels();
    let k = model.space().len();
    let mut masses: BTreeMap<u64, SymbolMass> = BTreeMap::new();
    let mut add = |symbol: u64, p: f64, idx: &[usize]| {
        let entry = masses.entry(symbol).or_insert_with(|| SymbolMass {
            total: 0.0,
            per_state: vec![0.0; m * k],
        });
        entry.total += p;
        for (j, &kj) in idx.iter().enumerate() {
            entry.per_state[j * k + kj] += p;
        }
    };
    model.for_each_outcome(|idx, x, p| match model.symbol_pmf(idx, x) {
        SymbolPmf::Point(s) => add(s, p, idx),
        SymbolPmf::Table(pmf) => {
            for &(s, q) in pmf {
                if q > 0.0 {
                    add(s, p * q, idx);
                }
            }
        }
    })?;
    ConditionalStats::from_masses(model.user(), model.space().clone(), m, masses)
}

/// Empirical tables from `n_samples` simulated slots. Unseen symbols are absent.
pub fn estimate_conditional_stats(
    model: &UserChannelModel,
    n_samples: u64,
    seed: u64,
) -> Result<ConditionalStats> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
    }
    let m = model.channels();
    let k = model.space().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<u64, (u64, Vec<u64>)> = BTreeMap::new();
    let mut idx = vec![0usize; m];
    let mut x = vec![0u32; m];
    for _ in 0..n_samples {
        let s = model.sample_into(&mut idx, &mut x, &mut rng);
        let entry = counts.entry(s).or_insert_with(|| (0, vec![0; m * k]));
        entry.0 += 1;
        for (j, &kj) in idx.iter().enumerate() {
            entry.1[j * k + kj] += 1;
        }
    }
    let masses = counts
        .into_iter()
        .map(|(s, (n, per_state))| {
            (
                s,
                SymbolMass {
                    total: n as f64,
                    per_state: per_state.into_iter().map(|c| c as f64).collect(),
                },
            )
        })
        .collect();
    ConditionalStats::from_masses(model.user(), model.space().clone(), m, masses)
}

/// Exact statistics for every user of a model.
pub fn derive_all(models: &[UserChannelModel]) -> Result<Vec<ConditionalStats>> {
    models.iter().map(derive_conditional_stats).collect()
}
