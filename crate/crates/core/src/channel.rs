//! Discrete channel states, per-user channel models and feedback estimators.
//!
//! A user's channel in one slot is a vector of `M` independent per-channel
//! states drawn from their marginals. The scheduler never sees that vector;
//! it sees an estimate symbol produced by the user's [`Estimator`]. Symbols
//! are plain `u64` labels: raw sums, rounded averages, a mixed-radix code of
//! the whole state vector (exact feedback) or a label from a kernel table.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest joint outcome count we are willing to enumerate exactly.
pub const ENUMERATION_CAP: u64 = 10_000_000;

const PMF_TOLERANCE: f64 = 1e-12;

/// Ordered set of channel states, in packets per slot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct StateSpace {
    values: Vec<u32>,
}

impl StateSpace {
    pub fn new(values: Vec<u32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidModel("state space is empty".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel(format!(
                "state space must be strictly increasing, got {values:?}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x_max(&self) -> u32 {
        *self.values.last().expect("non-empty by construction")
    }

    pub fn index_of(&self, x: u32) -> Option<usize> {
        self.values.binary_search(&x).ok()
    }

    /// Index of the smallest state `>= x`, if any.
    pub fn first_at_least(&self, x: u32) -> Option<usize> {
        let idx = self.values.partition_point(|&v| v < x);
        (idx < self.values.len()).then_some(idx)
    }
}

impl TryFrom<Vec<u32>> for StateSpace {
    type Error = Error;

    fn try_from(values: Vec<u32>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<StateSpace> for Vec<u32> {
    fn from(space: StateSpace) -> Self {
        space.values
    }
}

/// One row of a kernel estimator: the symbol pmf emitted for a state vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEntry {
    pub x: Vec<u32>,
    pub s: Vec<(u64, f64)>,
}

/// Estimator description as it appears in a model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Exact,
    Sum,
    AvgFloor,
    AvgCeil,
    Kernel { table: Vec<KernelEntry> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Exact,
    Sum,
    AvgFloor,
    AvgCeil,
    Kernel,
}

#[derive(Debug)]
struct KernelTable {
    rows: HashMap<Vec<u32>, Vec<(u64, f64)>>,
}

#[derive(Clone, Debug)]
enum Estimator {
    Exact { radix: u64 },
    Sum,
    AvgFloor,
    AvgCeil,
    Kernel(Arc<KernelTable>),
}

/// Generative model of one user's channel states and fed-back estimate.
#[derive(Clone, Debug)]
pub struct UserChannelModel {
    user: usize,
    space: StateSpace,
    marginals: Vec<Vec<f64>>,
    cumulative: Vec<Vec<f64>>,
    last_positive: Vec<usize>,
    estimator: Estimator,
}

impl UserChannelModel {
    pub fn new(
        user: usize,
        space: StateSpace,
        marginals: Vec<Vec<f64>>,
        estimator: &EstimatorSpec,
    ) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidModel(format!("user {user} has no channels")));
        }
        for (j, pmf) in marginals.iter().enumerate() {
            if pmf.len() != space.len() {
                return Err(Error::InvalidModel(format!(
                    "user {user} channel {j}: pmf has {} entries, state space has {}",
                    pmf.len(),
                    space.len()
                )));
            }
            if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "user {user} channel {j}: pmf entries must be finite and non-negative"
                )));
            }
            let total: f64 = pmf.iter().sum();
            if (total - 1.0).abs() > PMF_TOLERANCE {
                return Err(Error::InvalidModel(format!(
                    "user {user} channel {j}: pmf sums to {total}, expected 1"
                )));
            }
        }
        let cumulative = marginals
            .iter()
            .map(|pmf| {
                pmf.iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        let last_positive = marginals
            .iter()
            .map(|pmf| pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0))
            .collect();
        let channels = marginals.len();
        let estimator = match estimator {
            EstimatorSpec::Exact => {
                let radix = space.len() as u64;
                if radix.checked_pow(channels as u32).is_none() {
                    return Err(Error::InvalidModel(format!(
                        "exact feedback over {channels} channels does not fit a 64-bit symbol"
                    )));
                }
                Estimator::Exact { radix }
            }
            EstimatorSpec::Sum => Estimator::Sum,
            EstimatorSpec::AvgFloor => Estimator::AvgFloor,
            EstimatorSpec::AvgCeil => Estimator::AvgCeil,
            EstimatorSpec::Kernel { table } => {
                Estimator::Kernel(Arc::new(KernelTable::compile(table, &space, channels)?))
            }
        };
        let model = Self {
            user,
            space,
            marginals,
            cumulative,
            last_positive,
            estimator,
        };
        if let Estimator::Kernel(table) = &model.estimator {
            model.check_kernel_coverage(table)?;
        }
        Ok(model)
    }

    pub fn user(&self) -> usize {
        self.user
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn channels(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    pub fn estimator_kind(&self) -> EstimatorKind {
        match self.estimator {
            Estimator::Exact { .. } => EstimatorKind::Exact,
            Estimator::Sum => EstimatorKind::Sum,
            Estimator::AvgFloor => EstimatorKind::AvgFloor,
            Estimator::AvgCeil => EstimatorKind::AvgCeil,
            Estimator::Kernel(_) => EstimatorKind::Kernel,
        }
    }

    /// `|X|^M`, saturating.
    pub fn joint_outcomes(&self) -> u128 {
        (self.space.len() as u128)
            .checked_pow(self.channels() as u32)
            .unwrap_or(u128::MAX)
    }

    /// Draws one slot: the true state vector and the fed-back symbol.
    pub fn sample_slot<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<u32>, u64) {
        let mut idx = vec![0usize; self.channels()];
        let mut x = vec![0u32; self.channels()];
        let s = self.sample_into(&mut idx, &mut x, rng);
        (x, s)
    }

    /// Allocation-free variant of [`sample_slot`](Self::sample_slot).
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        state_idx: &mut [usize],
        x: &mut [u32],
        rng: &mut R,
    ) -> u64 {
        for j in 0..self.channels() {
            let u: f64 = rng.random();
            let cum = &self.cumulative[j];
            let k = cum.partition_point(|&c| c <= u);
            let k = k.min(self.last_positive[j]);
            state_idx[j] = k;
            x[j] = self.space.values()[k];
        }
        match &self.estimator {
            Estimator::Kernel(table) => {
                let pmf = table
                    .rows
                    .get(&x[..])
                    .expect("kernel coverage is checked at construction");
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(s, p) in pmf {
                    acc += p;
                    if u < acc {
                        return s;
                    }
                }
                pmf.iter()
                    .rev()
                    .find(|(_, p)| *p > 0.0)
                    .map(|(s, _)| *s)
                    .expect("kernel rows have positive mass")
            }
            _ => self.deterministic_symbol(state_idx, x),
        }
    }

    fn deterministic_symbol(&self, state_idx: &[usize], x: &[u32]) -> u64 {
        let m = x.len() as u64;
        let sum = || x.iter().map(|&v| v as u64).sum::<u64>();
        match self.estimator {
            Estimator::Exact { radix } => state_idx
                .iter()
                .rev()
                .fold(0u64, |acc, &k| acc * radix + k as u64),
            Estimator::Sum => sum(),
            Estimator::AvgFloor => sum() / m,
            Estimator::AvgCeil => sum().div_ceil(m),
            Estimator::Kernel(_) => unreachable!("kernel symbols are random"),
        }
    }

    /// Symbol pmf emitted for the state vector `x` (state indices `state_idx`).
    pub(crate) fn symbol_pmf(&self, state_idx: &[usize], x: &[u32]) -> SymbolPmf<'_> {
        match &self.estimator {
            Estimator::Kernel(table) => SymbolPmf::Table(
                table
                    .rows
                    .get(x)
                    .expect("kernel coverage is checked at construction"),
            ),
            _ => SymbolPmf::Point(self.deterministic_symbol(state_idx, x)),
        }
    }

    /// State vector encoded by an exact-feedback symbol.
    pub fn decode_exact(&self, symbol: u64) -> Option<Vec<u32>> {
        let Estimator::Exact { radix } = self.estimator else {
            return None;
        };
        let mut rest = symbol;
        let mut x = Vec::with_capacity(self.channels());
        for _ in 0..self.channels() {
            x.push(self.space.values()[(rest % radix) as usize]);
            rest /= radix;
        }
        (rest == 0).then_some(x)
    }

    /// The per-channel average a naive scheduler reconstructs from the feedback.
    ///
    /// Only scalar feedback (sums and rounded averages) has a natural reading.
    pub fn naive_average(&self, symbol: u64) -> Option<f64> {
        match self.estimator {
            Estimator::Sum => Some(symbol as f64 / self.channels() as f64),
            Estimator::AvgFloor | Estimator::AvgCeil => Some(symbol as f64),
            Estimator::Exact { .. } | Estimator::Kernel(_) => None,
        }
    }

    /// Visits every state vector of positive probability with its probability.
    pub(crate) fn for_each_outcome(&self, mut f: impl FnMut(&[usize], &[u32], f64)) -> Result<()> {
        let outcomes = self.joint_outcomes();
        if outcomes > ENUMERATION_CAP as u128 {
            return Err(Error::EnumerationTooLarge {
                outcomes,
                cap: ENUMERATION_CAP,
            });
        }
        let supports: Vec<Vec<usize>> = self
            .marginals
            .iter()
            .map(|pmf| (0..pmf.len()).filter(|&k| pmf[k] > 0.0).collect())
            .collect();
        let m = self.channels();
        let mut cursor = vec![0usize; m];
        let mut idx: Vec<usize> = supports.iter().map(|s| s[0]).collect();
        let mut x: Vec<u32> = idx.iter().map(|&k| self.space.values()[k]).collect();
        loop {
            let p: f64 = (0..m).map(|j| self.marginals[j][idx[j]]).product();
            f(&idx, &x, p);
            let mut j = 0;
            loop {
                if j == m {
                    return Ok(());
                }
                cursor[j] += 1;
                if cursor[j] < supports[j].len() {
                    idx[j] = supports[j][cursor[j]];
                    x[j] = self.space.values()[idx[j]];
                    break;
                }
                cursor[j] = 0;
                idx[j] = supports[j][0];
                x[j] = self.space.values()[idx[j]];
                j += 1;
            }
        }
    }

    fn check_kernel_coverage(&self, table: &KernelTable) -> Result<()> {
        let mut missing = None;
        self.for_each_outcome(|_, x, _| {
            if missing.is_none() && !table.rows.contains_key(x) {
                missing = Some(x.to_vec());
            }
        })?;
        match missing {
            Some(x) => Err(Error::InvalidModel(format!(
                "user {}: kernel table has no row for reachable state vector {x:?}",
                self.user
            ))),
            None => Ok(()),
        }
    }
}

pub(crate) enum SymbolPmf<'a> {
    Point(u64),
    Table(&'a [(u64, f64)]),
}

impl KernelTable {
    fn compile(entries: &[KernelEntry], space: &StateSpace, channels: usize) -> Result<Self> {
        let mut rows = HashMap::with_capacity(entries.len());
        for entry in entries {
            if entry.x.len() != channels {
                return Err(Error::InvalidModel(format!(
                    "kernel row {:?} has {} states, expected {channels}",
                    entry.x,
                    entry.x.len()
                )));
            }
            if let Some(v) = entry.x.iter().find(|&&v| space.index_of(v).is_none()) {
                return Err(Error::InvalidModel(format!(
                    "kernel row {:?} uses state {v} outside the state space",
                    entry.x
                )));
            }
            if entry.s.iter().any(|(_, p)| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "kernel row {:?} has a negative or non-finite probability",
                    entry.x
                )));
            }
            let total: f64 = entry.s.iter().map(|(_, p)| p).sum();
            if (total - 1.0).abs() > PMF_TOLERANCE {
                return Err(Error::InvalidModel(format!(
                    "kernel row {:?} sums to {total}, expected 1",
                    entry.x
                )));
            }
            if rows.insert(entry.x.clone(), entry.s.clone()).is_some() {
                return Err(Error::InvalidModel(format!(
                    "kernel row {:?} appears twice",
                    entry.x
                )));
            }
        }
        Ok(Self { rows })
    }
}

/// Multi-user channel model as stored in a model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub users: usize,
    pub channels: usize,
    pub state_space: Vec<u32>,
    /// `marginals[i][j]` is the pmf of user `i`, channel `j` over the state space.
    pub marginals: Vec<Vec<Vec<f64>>>,
    pub estimator: EstimatorSpec,
}

impl ModelSpec {
    /// Identical marginal `pmf` on every user and channel.
    pub fn symmetric(
        users: usize,
        channels: usize,
        state_space: Vec<u32>,
        pmf: Vec<f64>,
        estimator: EstimatorSpec,
    ) -> Self {
        Self {
            users,
            channels,
            state_space,
            marginals: vec![vec![pmf; channels]; users],
            estimator,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("model", e))
    }

    pub fn build(&self) -> Result<Vec<UserChannelModel>> {
        if self.users == 0 || self.channels == 0 {
            return Err(Error::InvalidModel("users and channels must be positive".into()));
        }
        if self.marginals.len() != self.users {
            return Err(Error::InvalidModel(format!(
                "marginals list {} users, model declares {}",
                self.marginals.len(),
                self.users
            )));
        }
        let space = StateSpace::new(self.state_space.clone())?;
        self.marginals
            .iter()
            .enumerate()
            .map(|(i, per_channel)| {
                if per_channel.len() != self.channels {
                    return Err(Error::InvalidModel(format!(
                        "user {i} lists {} channels, model declares {}",
                        per_channel.len(),
                        self.channels
                    )));
                }
                UserChannelModel::new(i, space.clone(), per_channel.clone(), &self.estimator)
            })
            .collect()
    }
}
