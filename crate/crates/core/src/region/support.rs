//! Vertices of the stability region.
//!
//! A priority vector `w` induces the rule "all channels to the user maximising
//! `w_i c_i(s_i)`". Because users' estimates are independent, the mean service
//! of that rule factorises into products of per-user distribution functions,
//! so vertices are computed exactly without enumerating joint estimates.

use crate::stats::ConditionalStats;

/// Distribution of one user's vertex rate `c_i(S_i)`.
#[derive(Clone, Debug)]
pub(crate) struct RateDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
    /// `cdf[k] = P(c <= values[k])`.
    cdf: Vec<f64>,
}

impl RateDistribution {
    pub(crate) fn new(stats: &ConditionalStats) -> Self {
        let mut pairs: Vec<(f64, f64)> = stats
            .rows()
            .iter()
            .filter(|r| r.prob > 0.0)
            .map(|r| (r.vertex_rate(), r.prob))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            if values.last() == Some(&v) {
                *probs.last_mut().unwrap() += p;
            } else {
                values.push(v);
                probs.push(p);
            }
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { values, probs, cdf }
    }

    pub(crate) fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    fn mass_where(&self, count: usize) -> f64 {
        if count == 0 {
            0.0
        } else {
            self.cdf[count - 1]
        }
    }

    /// `P(w c < a)`.
    fn below(&self, w: f64, a: f64) -> f64 {
        self.mass_where(self.values.partition_point(|&v| w * v < a))
    }

    /// `P(w c <= a)`.
    fn at_most(&self, w: f64, a: f64) -> f64 {
        self.mass_where(self.values.partition_point(|&v| w * v <= a))
    }
}

/// Mean service vector of the priority rule `w`, with the same tie rule as
/// [`crate::policy::priority_winner`]: the first user attaining the largest
/// positive score wins.
pub(crate) fn vertex(w: &[f64], dists: &[RateDistribution]) -> Vec<f64> {
    let n = dists.len();
    let mut v = vec![0.0; n];
    for i in 0..n {
        if w[i] <= 0.0 {
            continue;
        }
        let mut total = 0.0;
        for (&c, &p) in dists[i].values.iter().zip(&dists[i].probs) {
            let a = w[i] * c;
            if a <= 0.0 {
                continue;
            }
            let mut win = p;
            for (k, d) in dists.iter().enumerate() {
                if k == i {
                    continue;
                }
                win *= if k < i { d.below(w[k], a) } else { d.at_most(w[k], a) };
                if win == 0.0 {
                    break;
                }
            }
            total += win * c;
        }
        v[i] = total;
    }
    v
}

/// `h(w) = max over the region of w . u`, attained at [`vertex`].
pub(crate) fn support(w: &[f64], dists: &[RateDistribution]) -> (f64, Vec<f64>) {
    let v = vertex(w, dists);
    let h = w.iter().zip(&v).map(|(a, b)| a * b).sum();
    (h, v)
}
