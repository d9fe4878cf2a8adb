use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arrivals::{ArrivalFamily, ArrivalProcess};
use crate::channel::{ModelSpec, UserChannelModel};
use crate::dynamics::{QosSetup, TrafficClass, DEFAULT_WARMUP_FRACTION};
use crate::error::{Error, Result};
use crate::policy::{Policy, Rounding, StatWeights};
use crate::region::RegionSolver;
use crate::stats::{derive_all, ConditionalStats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub path: PathBuf,
}

/// A channel model given inline or as a path to a model JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    File(ModelFile),
    Inline(ModelSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Mw,
    Imw,
    /// Without `gamma_path`, weights come from the region LP at each sweep point.
    Stat {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma_path: Option<PathBuf>,
    },
    NaiveMw { rounding: Rounding },
    NaiveImw { rounding: Rounding },
    Qmw,
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Mw => "mw",
            PolicySpec::Imw => "imw",
            PolicySpec::Stat { .. } => "stat",
            PolicySpec::NaiveMw { .. } => "naive_mw",
            PolicySpec::NaiveImw { .. } => "naive_imw",
            PolicySpec::Qmw => "qmw",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSpec {
    pub family: ArrivalFamily,
    /// Sweep values: mean arrivals per slot (per frame in QoS mode).
    pub means: Vec<f64>,
    /// Per-user multipliers of the sweep value; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shares: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", deny_unknown_fields)]
pub enum QosUser {
    RealTime {
        drop_ratio: f64,
        arrivals: ArrivalProcess,
    },
    RateGuaranteed {
        min_rate: f64,
    },
    BestEffort,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosSpec {
    pub frame_len: u32,
    pub users: Vec<QosUser>,
}

fn default_warmup() -> f64 {
    DEFAULT_WARMUP_FRACTION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelSource,
    pub policies: Vec<PolicySpec>,
    pub arrivals: ArrivalSpec,
    /// Slots per replication.
    pub horizon: u64,
    /// Horizon used when the full-scale run is requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_horizon: Option<u64>,
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qos: Option<QosSpec>,
    /// Initial backlog of every queued user.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_backlog: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("experiment config", e))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: Self =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialise")
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        match &self.model {
            ModelSource::Inline(spec) => Ok(spec.clone()),
            ModelSource::File(f) => {
                let path = self.resolve(&f.path);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
            }
        }
    }

    /// Checks everything that does not need the channel model.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.policies.is_empty() {
            return bad("at least one policy is required".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.arrivals.means.is_empty() {
            return bad("the arrival sweep needs at least one mean".into());
        }
        if self.arrivals.means.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return bad("sweep means must be finite and non-negative".into());
        }
        if self.horizon == 0 || self.full_horizon == Some(0) {
            return bad("horizon must be at least one slot".into());
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad(format!("warm-up fraction {} outside [0, 1)", self.warmup_fraction));
        }
        if let Some(shares) = &self.arrivals.shares {
            if shares.iter().any(|s| !s.is_finite() || *s < 0.0) {
                return bad("arrival shares must be finite and non-negative".into());
            }
        }
        if let Some(q) = &self.qos {
            if q.frame_len == 0 || self.horizon < u64::from(q.frame_len) {
                return bad("QoS mode needs 1 <= frame length <= horizon".into());
            }
        }
        Ok(())
    }

    /// Loads the model, derives its statistics and validates the whole config.
    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let spec = self.model_spec()?;
        let models = spec.build()?;
        let stats = derive_all(&models)?;
        let n = models.len();
        if let Some(shares) = &self.arrivals.shares {
            if shares.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "{} arrival shares for {n} users",
                    shares.len()
                )));
            }
        }
        let qos = match &self.qos {
            None => None,
            Some(q) => {
                if q.users.len() != n {
                    return Err(Error::InvalidConfig(format!(
                        "{} QoS classes for {n} users",
                        q.users.len()
                    )));
                }
                for u in &q.users {
                    if let QosUser::RealTime { arrivals, .. } = u {
                        arrivals.validate()?;
                    }
                }
                let setup = QosSetup {
                    frame_len: q.frame_len,
                    classes: q
                        .users
                        .iter()
                        .map(|u| match *u {
                            QosUser::RealTime { drop_ratio, .. } => TrafficClass::RealTime { drop_ratio },
                            QosUser::RateGuaranteed { min_rate } => {
                                TrafficClass::RateGuaranteed { min_rate }
                            }
                            QosUser::BestEffort => TrafficClass::BestEffort,
                        })
                        .collect(),
                };
                Some(setup)
            }
        };
        let prepared = Prepared {
            config: self.clone(),
            models: Arc::new(models),
            stats: Arc::new(stats),
            qos,
        };
        for &v in &self.arrivals.means {
            prepared.arrivals_at(v)?;
        }
        for p in &self.policies {
            prepared.check_policy(p)?;
        }
        Ok(prepared)
    }
}

/// A validated config with its model and statistics built.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub models: Arc<Vec<UserChannelModel>>,
    pub stats: Arc<Vec<ConditionalStats>>,
    pub qos: Option<QosSetup>,
}

impl Prepared {
    pub fn users(&self) -> usize {
        self.models.len()
    }

    fn share(&self, user: usize) -> f64 {
        self.config.arrivals.shares.as_ref().map_or(1.0, |s| s[user])
    }

    /// Per-user arrival processes at sweep value `mean`.
    pub fn arrivals_at(&self, mean: f64) -> Result<Vec<ArrivalProcess>> {
        let family = &self.config.arrivals.family;
        (0..self.users())
            .map(|i| match self.config.qos.as_ref().map(|q| &q.users[i]) {
                Some(QosUser::RealTime { arrivals, .. }) => Ok(arrivals.clone()),
                Some(QosUser::RateGuaranteed { .. }) => Ok(ArrivalProcess::Zero),
                _ => family.with_mean(mean * self.share(i)),
            })
            .collect()
    }

    /// Per-slot rates the scheduler must support at sweep value `mean`.
    pub fn slot_rates_at(&self, mean: f64) -> Result<Vec<f64>> {
        let (base, direction) = self.rate_line()?;
        Ok(base
            .iter()
            .zip(&direction)
            .map(|(b, d)| b + mean * d)
            .collect())
    }

    /// Per-slot rates as `base + mean * direction`: QoS users contribute a
    /// fixed base, the swept users the direction.
    pub fn rate_line(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.users();
        let mut base = vec![0.0; n];
        let mut direction = vec![0.0; n];
        match &self.config.qos {
            None => {
                for (i, d) in direction.iter_mut().enumerate() {
                    *d = self.share(i);
                }
            }
            Some(q) => {
                let t = f64::from(q.frame_len);
                for (i, u) in q.users.iter().enumerate() {
                    match u {
                        QosUser::RealTime {
                            drop_ratio,
                            arrivals,
                        } => base[i] = arrivals.mean() * (1.0 - drop_ratio) / t,
                        QosUser::RateGuaranteed { min_rate } => base[i] = min_rate / t,
                        QosUser::BestEffort => direction[i] = self.share(i) / t,
                    }
                }
            }
        }
        Ok((base, direction))
    }

    fn check_policy(&self, spec: &PolicySpec) -> Result<()> {
        match spec {
            PolicySpec::NaiveMw { .. } | PolicySpec::NaiveImw { .. } => {
                if self.models.iter().any(|m| m.naive_average(0).is_none()) {
                    return Err(Error::InvalidConfig(
                        "naive policies need sum or rounded-average feedback".into(),
                    ));
                }
            }
            PolicySpec::Stat {
                gamma_path: Some(path),
            } => {
                let w = self.load_gamma(path)?;
                if w.users() != self.users() {
                    return Err(Error::InvalidStatWeights(format!(
                        "weights for {} users in a {}-user model",
                        w.users(),
                        self.users()
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn load_gamma(&self, path: &Path) -> Result<StatWeights> {
        let path = self.config.resolve(path);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    /// The runnable policy for `spec` at sweep value `mean`.
    pub fn policy_at(&self, spec: &PolicySpec, mean: f64) -> Result<Policy> {
        Ok(match spec {
            PolicySpec::Mw => Policy::MaxWeight,
            PolicySpec::Imw => Policy::IterativeMaxWeight,
            PolicySpec::Qmw => Policy::QosMaxWeight,
            PolicySpec::NaiveMw { rounding } => Policy::NaiveMaxWeight(*rounding),
            PolicySpec::NaiveImw { rounding } => Policy::NaiveIterative(*rounding),
            PolicySpec::Stat {
                gamma_path: Some(path),
            } => Policy::Stat(Arc::new(self.load_gamma(path)?)),
            PolicySpec::Stat { gamma_path: None } => {
                // Outside the region this is still the weight vector with the
                // smallest shortfall.
                let rates = self.slot_rates_at(mean)?;
                let cert = RegionSolver::new(&self.stats)?.membership(&rates)?;
                Policy::Stat(Arc::new(cert.gamma))
            }
        })
    }
}
