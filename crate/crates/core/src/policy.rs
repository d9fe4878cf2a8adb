//! Scheduling policies.
//!
//! Every decider maps (weights, fed-back estimates, conditional statistics)
//! to an [`Allocation`]: for each channel, at most one user and a rate.
//! Ties are broken towards the smallest user index everywhere; scores within
//! a relative `1e-12` of each other count as ties so that rescaling the
//! weights never changes a decision.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::UserChannelModel;
use crate::error::{Error, Result};
use crate::stats::{beats, ConditionalStats, EstimateRow};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub user: Option<usize>,
    pub rate: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub channels: Vec<Assignment>,
}

impl Allocation {
    pub fn idle(channels: usize) -> Self {
        Self {
            channels: vec![Assignment::default(); channels],
        }
    }

    /// Channels won by `user`, with their rates.
    pub fn channels_of(&self, user: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.channels
            .iter()
            .enumerate()
            .filter(move |(_, a)| a.user == Some(user))
            .map(|(j, a)| (j, a.rate))
    }
}

/// How a naive scheduler turns the fed-back average into a per-channel rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    Floor,
    Ceil,
}

impl Rounding {
    pub fn apply(self, average: f64) -> u32 {
        let v = match self {
            Rounding::Floor => average.floor(),
            Rounding::Ceil => average.ceil(),
        };
        v.max(0.0) as u32
    }
}

fn rows_for<'a>(estimates: &[u64], stats: &'a [ConditionalStats]) -> Result<Vec<&'a EstimateRow>> {
    assert_eq!(estimates.len(), stats.len(), "one estimate per user");
    estimates
        .iter()
        .zip(stats)
        .map(|(&s, st)| st.row(s))
        .collect()
}

/// Smallest index maximising `score(i)` (up to the tie tolerance).
fn argmax_user(n: usize, score: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_score = score(0);
    for i in 1..n {
        let s = score(i);
        if beats(s, best_score) {
            best = i;
            best_score = s;
        }
    }
    best
}

/// MaxWeight: per channel, the user maximising weight x success probability x rate.
pub fn mw_decide(
    weights: &[f64],
    estimates: &[u64],
    stats: &[ConditionalStats],
) -> Result<Allocation> {
    let rows = rows_for(estimates, stats)?;
    let m = stats[0].channels();
    let channels = (0..m)
        .map(|j| {
            let i = argmax_user(rows.len(), |i| weights[i] * rows[i].best()[j].goodput());
            Assignment {
                user: Some(i),
                rate: rows[i].best()[j].rate,
            }
        })
        .collect();
    Ok(Allocation { channels })
}

/// Iterative MaxWeight: channels in index order, each round against virtual
/// weights reduced by the rate already granted.
pub fn imw_decide(
    weights: &[f64],
    estimates: &[u64],
    stats: &[ConditionalStats],
) -> Result<Allocation> {
    let rows = rows_for(estimates, stats)?;
    let mut virtual_weights = weights.to_vec();
    let m = stats[0].channels();
    let mut channels = Vec::with_capacity(m);
    for j in 0..m {
        let i = argmax_user(rows.len(), |i| {
            virtual_weights[i] * rows[i].best()[j].goodput()
        });
        let rate = rows[i].best()[j].rate;
        virtual_weights[i] = (virtual_weights[i] - rate as f64).max(0.0);
        channels.push(Assignment {
            user: Some(i),
            rate,
        });
    }
    Ok(Allocation { channels })
}

/// QoS MaxWeight: MaxWeight with the frame-frozen weights `phi`.
pub fn qmw_decide(phi: &[f64], estimates: &[u64], stats: &[ConditionalStats]) -> Result<Allocation> {
    mw_decide(phi, estimates, stats)
}

/// Naive MaxWeight: trusts the rounded fed-back average as every channel's state.
pub fn naive_mw_decide(
    weights: &[f64],
    averages: &[f64],
    rounding: Rounding,
    channels: usize,
) -> Allocation {
    let rates: Vec<u32> = averages.iter().map(|&a| rounding.apply(a)).collect();
    let i = argmax_user(rates.len(), |i| weights[i] * rates[i] as f64);
    Allocation {
        channels: vec![
            Assignment {
                user: Some(i),
                rate: rates[i],
            };
            channels
        ],
    }
}

/// Iterative variant of [`naive_mw_decide`].
pub fn naive_imw_decide(
    weights: &[f64],
    averages: &[f64],
    rounding: Rounding,
    channels: usize,
) -> Allocation {
    let rates: Vec<u32> = averages.iter().map(|&a| rounding.apply(a)).collect();
    let mut virtual_weights = weights.to_vec();
    let channels = (0..channels)
        .map(|_| {
            let i = argmax_user(rates.len(), |i| virtual_weights[i] * rates[i] as f64);
            virtual_weights[i] = (virtual_weights[i] - rates[i] as f64).max(0.0);
            Assignment {
                user: Some(i),
                rate: rates[i],
            }
        })
        .collect();
    Allocation { channels }
}

/// A deterministic priority rule: give every channel to the user maximising
/// `priorities[i] * c_i(s_i)`, nobody if that maximum is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityComponent {
    pub weight: f64,
    pub priorities: Vec<f64>,
}

/// Winner of a priority rule. Exact comparisons, smallest index on ties; the
/// region solver reproduces this rule when it computes vertex service rates.
pub fn priority_winner(priorities: &[f64], vertex_rate: impl Fn(usize) -> f64) -> Option<usize> {
    let mut best = None;
    let mut best_score = 0.0;
    for (i, &w) in priorities.iter().enumerate() {
        let score = w * vertex_rate(i);
        if score > best_score {
            best = Some(i);
            best_score = score;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
enum GammaForm {
    Table(BTreeMap<Vec<u64>, Vec<f64>>),
    Mixture(Vec<PriorityComponent>),
}

/// Per joint estimate `s`, a sub-distribution `gamma^s` over users.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StatWeightsRepr", into = "StatWeightsRepr")]
pub struct StatWeights {
    users: usize,
    form: GammaForm,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaEntry {
    pub estimates: Vec<u64>,
    pub gamma: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
enum StatWeightsRepr {
    Table {
        users: usize,
        entries: Vec<GammaEntry>,
    },
    Mixture {
        users: usize,
        components: Vec<PriorityComponent>,
    },
}

const SUBDISTRIBUTION_TOLERANCE: f64 = 1e-9;

fn check_subdistribution(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidStatWeights(format!(
            "{what}: entries must be finite and non-negative"
        )));
    }
    let total: f64 = values.iter().sum();
    if total > 1.0 + SUBDISTRIBUTION_TOLERANCE {
        return Err(Error::InvalidStatWeights(format!("{what}: sums to {total} > 1")));
    }
    Ok(())
}

impl TryFrom<StatWeightsRepr> for StatWeights {
    type Error = Error;

    fn try_from(repr: StatWeightsRepr) -> Result<Self> {
        match repr {
            StatWeightsRepr::Table { users, entries } => {
                let mut table = BTreeMap::new();
                for e in entries {
                    table.insert(e.estimates, e.gamma);
                }
                Self::table(users, table)
            }
            StatWeightsRepr::Mixture { users, components } => Self::mixture(users, components),
        }
    }
}

impl From<StatWeights> for StatWeightsRepr {
    fn from(w: StatWeights) -> Self {
        match w.form {
            GammaForm::Table(table) => StatWeightsRepr::Table {
                users: w.users,
                entries: table
                    .into_iter()
                    .map(|(estimates, gamma)| GammaEntry { estimates, gamma })
                    .collect(),
            },
            GammaForm::Mixture(components) => StatWeightsRepr::Mixture {
                users: w.users,
                components,
            },
        }
    }
}

impl StatWeights {
    pub fn table(users: usize, table: BTreeMap<Vec<u64>, Vec<f64>>) -> Result<Self> {
        if users == 0 {
            return Err(Error::InvalidStatWeights("no users".into()));
        }
        for (s, gamma) in &table {
            if s.len() != users || gamma.len() != users {
                return Err(Error::InvalidStatWeights(format!(
                    "entry {s:?} does not match {users} users"
                )));
            }
            check_subdistribution(&format!("gamma for {s:?}"), gamma)?;
        }
        Ok(Self {
            users,
            form: GammaForm::Table(table),
        })
    }

    pub fn mixture(users: usize, components: Vec<PriorityComponent>) -> Result<Self> {
        if users == 0 {
            return Err(Error::InvalidStatWeights("no users".into()));
        }
        let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
        check_subdistribution("mixture weights", &weights)?;
        for c in &components {
            if c.priorities.len() != users
                || c.priorities.iter().any(|p| !p.is_finite() || *p < 0.0)
            {
                return Err(Error::InvalidStatWeights(
                    "priority vectors need one finite non-negative entry per user".into(),
                ));
            }
        }
        Ok(Self {
            users,
            form: GammaForm::Mixture(components),
        })
    }

    /// Point mass on one user for every estimate.
    pub fn always(users: usize, user: usize) -> Self {
        let mut priorities = vec![0.0; users];
        priorities[user] = 1.0;
        Self {
            users,
            form: GammaForm::Mixture(vec![PriorityComponent {
                weight: 1.0,
                priorities,
            }]),
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Explicit per-estimate table, if this is the table form.
    pub fn table_entries(&self) -> Option<&BTreeMap<Vec<u64>, Vec<f64>>> {
        match &self.form {
            GammaForm::Table(t) => Some(t),
            GammaForm::Mixture(_) => None,
        }
    }

    /// Priority-rule components, if this is the mixture form.
    pub fn components(&self) -> Option<&[PriorityComponent]> {
        match &self.form {
            GammaForm::Table(_) => None,
            GammaForm::Mixture(c) => Some(c),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("stat weights", e))
    }

    /// `gamma^s` for the joint estimate `estimates`.
    pub fn gamma_for(&self, estimates: &[u64], stats: &[ConditionalStats]) -> Result<Vec<f64>> {
        match &self.form {
            GammaForm::Table(table) => table
                .get(estimates)
                .cloned()
                .ok_or_else(|| Error::UnknownJointEstimate(estimates.to_vec())),
            GammaForm::Mixture(components) => {
                let rates = estimates
                    .iter()
                    .zip(stats)
                    .map(|(&s, st)| st.vertex_rate(s))
                    .collect::<Result<Vec<f64>>>()?;
                let mut gamma = vec![0.0; self.users];
                for c in components {
                    if let Some(i) = priority_winner(&c.priorities, |i| rates[i]) {
                        gamma[i] += c.weight;
                    }
                }
                Ok(gamma)
            }
        }
    }
}

/// STAT: draw one user from `gamma^s` (or nobody) and give it every channel
/// at its goodput-maximising rates.
pub fn stat_decide<R: Rng + ?Sized>(
    gamma: &StatWeights,
    estimates: &[u64],
    stats: &[ConditionalStats],
    rng: &mut R,
) -> Result<Allocation> {
    let rows = rows_for(estimates, stats)?;
    let g = gamma.gamma_for(estimates, stats)?;
    let m = stats[0].channels();
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, gi) in g.iter().enumerate() {
        acc += gi;
        if u < acc {
            return Ok(Allocation {
                channels: rows[i]
                    .best()
                    .iter()
                    .map(|r| Assignment {
                        user: Some(i),
                        rate: r.rate,
                    })
                    .collect(),
            });
        }
    }
    Ok(Allocation::idle(m))
}

/// A configured policy, ready to decide slots.
#[derive(Clone, Debug)]
pub enum Policy {
    MaxWeight,
    IterativeMaxWeight,
    Stat(Arc<StatWeights>),
    NaiveMaxWeight(Rounding),
    NaiveIterative(Rounding),
    QosMaxWeight,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::MaxWeight => "mw",
            Policy::IterativeMaxWeight => "imw",
            Policy::Stat(_) => "stat",
            Policy::NaiveMaxWeight(_) => "naive_mw",
            Policy::NaiveIterative(_) => "naive_imw",
            Policy::QosMaxWeight => "qmw",
        }
    }

    pub fn is_naive(&self) -> bool {
        matches!(self, Policy::NaiveMaxWeight(_) | Policy::NaiveIterative(_))
    }

    pub fn decide<R: Rng + ?Sized>(
        &self,
        weights: &[f64],
        estimates: &[u64],
        stats: &[ConditionalStats],
        models: &[UserChannelModel],
        rng: &mut R,
    ) -> Result<Allocation> {
        match self {
            Policy::MaxWeight => mw_decide(weights, estimates, stats),
            Policy::IterativeMaxWeight => imw_decide(weights, estimates, stats),
            Policy::QosMaxWeight => qmw_decide(weights, estimates, stats),
            Policy::Stat(gamma) => stat_decide(gamma, estimates, stats, rng),
            Policy::NaiveMaxWeight(rounding) | Policy::NaiveIterative(rounding) => {
                let averages = naive_averages(estimates, models)?;
                let m = models[0].channels();
                Ok(match self {
                    Policy::NaiveMaxWeight(_) => naive_mw_decide(weights, &averages, *rounding, m),
                    _ => naive_imw_decide(weights, &averages, *rounding, m),
                })
            }
        }
    }
}

fn naive_averages(estimates: &[u64], models: &[UserChannelModel]) -> Result<Vec<f64>> {
    estimates
        .iter()
        .zip(models)
        .map(|(&s, model)| {
            model.naive_average(s).ok_or_else(|| {
                Error::InvalidConfig(
                    "naive policies need sum or rounded-average feedback".into(),
                )
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::channel::{EstimatorSpec, ModelSpec};
    use crate::stats::derive_all;

    fn stats_for(spec: &ModelSpec) -> (Vec<UserChannelModel>, Vec<ConditionalStats>) {
        let models = spec.build().unwrap();
        let stats = derive_all(&models).unwrap();
        (models, stats)
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

    fn on_off(users: usize, channels: usize, estimator: EstimatorSpec) -> ModelSpec {
        ModelSpec::symmetric(users, channels, vec![0, 1], vec![0.5, 0.5], estimator)
    }

    fn rates(a: &Allocation) -> Vec<(Option<usize>, u32)> {
        a.channels.iter().map(|c| (c.user, c.rate)).collect()
    }

    #[test]
    fn mw_on_the_worked_example() {
        let (_, stats) = stats_for(&example_3a());
        let a = mw_decide(&[5.0], &[3], &stats).unwrap();
        assert_eq!(rates(&a), vec![(Some(0), 0), (Some(0), 6)]);
    }

    #[test]
    fn mw_zero_weights_fall_back_to_the_first_user() {
        let (_, stats) = stats_for(&on_off(3, 2, EstimatorSpec::Sum));
        let a = mw_decide(&[0.0; 3], &[0, 2, 1], &stats).unwrap();
        assert_eq!(rates(&a), vec![(Some(0), 0), (Some(0), 0)]);
    }

    #[test]
    fn mw_compares_weighted_goodput() {
        let (_, stats) = stats_for(&on_off(2, 6, EstimatorSpec::Sum));
        // (5 * 0.5, 1 * 1) = (2.5, 1): user 1 everywhere at rate 1.
        let a = mw_decide(&[5.0, 1.0], &[3, 6], &stats).unwrap();
        assert!(a.channels.iter().all(|c| c.user == Some(0) && c.rate == 1));
    }

    #[test]
    fn imw_hand_trace() {
        let (_, stats) = stats_for(&on_off(2, 2, EstimatorSpec::Exact));
        // Exact symbol of (1, 1) with radix 2 is 0b11.
        let a = imw_decide(&[1.0, 1.0], &[3, 3], &stats).unwrap();
        assert_eq!(rates(&a), vec![(Some(0), 1), (Some(1), 1)]);
        let b = mw_decide(&[1.0, 1.0], &[3, 3], &stats).unwrap();
        assert_eq!(rates(&b), vec![(Some(0), 1), (Some(0), 1)]);
    }

    #[test]
    fn imw_depends_on_the_weight_scale() {
        // The virtual decrement is in packets, so shrinking the weights below
        // one rate step changes later rounds.
        let (_, stats) = stats_for(&on_off(3, 4, EstimatorSpec::Sum));
        let w = [0.0, 37.0, 35.0];
        let small = [0.0, 0.37, 0.35];
        let a = imw_decide(&w, &[0, 2, 2], &stats).unwrap();
        let b = imw_decide(&small, &[0, 2, 2], &stats).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn imw_equals_mw_on_one_channel() {
        let (_, stats) = stats_for(&on_off(3, 1, EstimatorSpec::Exact));
        for s in [[0, 1, 1], [1, 0, 1], [1, 1, 1]] {
            let w = [2.0, 3.0, 1.0];
            assert_eq!(
                imw_decide(&w, &s, &stats).unwrap(),
                mw_decide(&w, &s, &stats).unwrap()
            );
        }
    }

    #[test]
    fn qmw_prefers_the_heavier_identical_user() {
        let (_, stats) = stats_for(&on_off(2, 3, EstimatorSpec::Sum));
        let a = qmw_decide(&[10.0, 1.0], &[2, 2], &stats).unwrap();
        assert!(a.channels.iter().all(|c| c.user == Some(0)));
        let b = qmw_decide(&[0.0, 4.0], &[2, 2], &stats).unwrap();
        assert!(b.channels.iter().all(|c| c.user == Some(1)));
    }

    #[test]
    fn naive_floor_of_a_partial_sum_is_zero() {
        let a = naive_mw_decide(&[3.0], &[5.0 / 6.0], Rounding::Floor, 6);
        assert!(a.channels.iter().all(|c| c.rate == 0));
        let b = naive_mw_decide(&[0.0, 0.0], &[0.0, 0.0], Rounding::Ceil, 2);
        assert!(b.channels.iter().all(|c| c.rate == 0));
    }

    #[test]
    fn naive_imw_shifts_the_second_channel() {
        let a = naive_imw_decide(&[3.0, 2.0], &[2.0, 2.0], Rounding::Floor, 2);
        assert_eq!(rates(&a), vec![(Some(0), 2), (Some(1), 2)]);
        let single = naive_imw_decide(&[3.0, 2.0], &[2.0, 2.0], Rounding::Floor, 1);
        assert_eq!(single, naive_mw_decide(&[3.0, 2.0], &[2.0, 2.0], Rounding::Floor, 1));
    }

    #[test]
    fn stat_point_mass_gives_every_channel() {
        let (_, stats) = stats_for(&example_3a());
        let gamma = StatWeights::always(1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = stat_decide(&gamma, &[4], &stats, &mut rng).unwrap();
        assert_eq!(rates(&a), vec![(Some(0), 2), (Some(0), 6)]);

        let (_, stats2) = stats_for(&on_off(2, 2, EstimatorSpec::Sum));
        let gamma = StatWeights::always(2, 1);
        let a = stat_decide(&gamma, &[2, 1], &stats2, &mut rng).unwrap();
        assert!(a.channels.iter().all(|c| c.user == Some(1)));
    }

    #[test]
    fn stat_half_half_splits_slots() {
        let (_, stats) = stats_for(&on_off(2, 2, EstimatorSpec::Sum));
        let mut table = BTreeMap::new();
        table.insert(vec![1, 1], vec![0.5, 0.5]);
        let gamma = StatWeights::table(2, table).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let first = (0..n)
            .filter(|_| {
                stat_decide(&gamma, &[1, 1], &stats, &mut rng).unwrap().channels[0].user
                    == Some(0)
            })
            .count();
        let frac = first as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "fraction {frac}");
        assert!(matches!(
            stat_decide(&gamma, &[2, 1], &stats, &mut rng),
            Err(Error::UnknownJointEstimate(_))
        ));
    }

    #[test]
    fn stat_weights_reject_overfull_distributions() {
        let mut table = BTreeMap::new();
        table.insert(vec![0, 0], vec![0.7, 0.4]);
        assert!(StatWeights::table(2, table).is_err());
        let json = r#"{"form":"mixture","users":2,"components":[{"weight":1.2,"priorities":[1,0]}]}"#;
        assert!(StatWeights::from_json(json).is_err());
        let json = r#"{"form":"table","users":2,"entries":[{"estimates":[0,1],"gamma":[0.25,0.75]}]}"#;
        let w = StatWeights::from_json(json).unwrap();
        let back = serde_json::to_string(&w).unwrap();
        assert_eq!(StatWeights::from_json(&back).unwrap(), w);
    }

    #[test]
    fn policy_dispatch_uses_naive_feedback() {
        let (models, stats) = stats_for(&example_3a());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = Policy::NaiveMaxWeight(Rounding::Floor)
            .decide(&[1.0], &[1], &stats, &models, &mut rng)
            .unwrap();
        assert_eq!(rates(&a), vec![(Some(0), 1), (Some(0), 1)]);

        let (models, stats) = stats_for(&on_off(1, 2, EstimatorSpec::Exact));
        let err = Policy::NaiveMaxWeight(Rounding::Floor).decide(&[1.0], &[0], &stats, &models, &mut rng);
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    mod properties {
        use proptest::prelude::*;

        use super::*;

        fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u64>)> {
            (
                proptest::collection::vec(0u32..50, 3),
                proptest::collection::vec(0u64..=4, 3),
            )
                .prop_map(|(w, s)| (w.into_iter().map(f64::from).collect(), s))
        }

        proptest! {
            #[test]
            fn deciders_are_scale_invariant((w, s) in instance(), c in 0.01f64..100.0) {
                let (_, stats) = stats_for(&on_off(3, 4, EstimatorSpec::Sum));
                let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
                prop_assert_eq!(mw_decide(&w, &s, &stats).unwrap(), mw_decide(&scaled, &s, &stats).unwrap());
                let avg: Vec<f64> = s.iter().map(|&v| v as f64 / 4.0).collect();
                prop_assert_eq!(
                    naive_mw_decide(&w, &avg, Rounding::Ceil, 4),
                    naive_mw_decide(&scaled, &avg, Rounding::Ceil, 4)
                );
            }

            #[test]
            fn imw_virtual_weights_never_increase((w, s) in instance()) {
                let (_, stats) = stats_for(&on_off(3, 4, EstimatorSpec::Sum));
                let a = imw_decide(&w, &s, &stats).unwrap();
                let mut virtual_weights = w.clone();
                for c in &a.channels {
                    let i = c.user.unwrap();
                    let next = (virtual_weights[i] - c.rate as f64).max(0.0);
                    prop_assert!(next <= virtual_weights[i]);
                    virtual_weights[i] = next;
                }
            }

            #[test]
            fn exact_on_off_mw_serves_longest_connected_queue(
                w in proptest::collection::vec(0u32..20, 3),
                x in proptest::collection::vec(0usize..2, 3),
            ) {
                let (_, stats) = stats_for(&on_off(3, 1, EstimatorSpec::Exact));
                let weights: Vec<f64> = w.iter().map(|&v| f64::from(v)).collect();
                let symbols: Vec<u64> = x.iter().map(|&v| v as u64).collect();
                let a = mw_decide(&weights, &symbols, &stats).unwrap();
                let connected: Vec<usize> = (0..3).filter(|&i| x[i] == 1 && w[i] > 0).collect();
                if let Some(&first) = connected.iter().max_by_key(|&&i| (w[i], std::cmp::Reverse(i))) {
                    prop_assert_eq!(a.channels[0].user, Some(first));
                    prop_assert_eq!(a.channels[0].rate, 1);
                }
            }
        }
    }
}
