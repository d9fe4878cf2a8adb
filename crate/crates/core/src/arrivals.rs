//! Exogenous packet arrivals, i.i.d. per slot (or per frame in QoS mode).

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalProcess {
    /// `trials` Bernoulli trials with success probability `mean / trials`.
    Binomial { trials: u64, mean: f64 },
    Bernoulli { mean: f64 },
    Deterministic { count: u64 },
    Zero,
}

impl ArrivalProcess {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ArrivalProcess::Binomial { trials, mean } => {
                if trials == 0 || !mean.is_finite() || mean < 0.0 || mean > trials as f64 {
                    return Err(Error::InvalidConfig(format!(
                        "binomial arrivals need 0 <= mean <= trials, got mean {mean} with {trials} trials"
                    )));
                }
            }
            ArrivalProcess::Bernoulli { mean } => {
                if !(0.0..=1.0).contains(&mean) {
                    return Err(Error::InvalidConfig(format!(
                        "bernoulli arrivals need a mean in [0, 1], got {mean}"
                    )));
                }
            }
            ArrivalProcess::Deterministic { .. } | ArrivalProcess::Zero => {}
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ArrivalProcess::Binomial { mean, .. } | ArrivalProcess::Bernoulli { mean } => mean,
            ArrivalProcess::Deterministic { count } => count as f64,
            ArrivalProcess::Zero => 0.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            ArrivalProcess::Binomial { trials, mean } => {
                let p = mean / trials as f64;
                trials as f64 * p * (1.0 - p) + mean * mean
            }
            ArrivalProcess::Bernoulli { mean } => mean,
            ArrivalProcess::Deterministic { count } => (count * count) as f64,
            ArrivalProcess::Zero => 0.0,
        }
    }

    pub fn sampler(&self) -> Result<ArrivalSampler> {
        self.validate()?;
        Ok(match *self {
            ArrivalProcess::Binomial { trials, mean } => {
                let dist = Binomial::new(trials, mean / trials as f64)
                    .map_err(|e| Error::InvalidConfig(format!("binomial arrivals: {e}")))?;
                ArrivalSampler::Binomial(dist)
            }
            ArrivalProcess::Bernoulli { mean } => ArrivalSampler::Bernoulli(mean),
            ArrivalProcess::Deterministic { count } => ArrivalSampler::Constant(count),
            ArrivalProcess::Zero => ArrivalSampler::Constant(0),
        })
    }
}

#[derive(Clone, Debug)]
pub enum ArrivalSampler {
    Binomial(Binomial),
    Bernoulli(f64),
    Constant(u64),
}

impl ArrivalSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            ArrivalSampler::Binomial(d) => d.sample(rng),
            ArrivalSampler::Bernoulli(p) => u64::from(rng.random::<f64>() < *p),
            ArrivalSampler::Constant(c) => *c,
        }
    }
}

/// An arrival family whose mean is set by a sweep value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalFamily {
    Binomial { trials: u64 },
    Bernoulli,
    Deterministic,
    Zero,
}

impl ArrivalFamily {
    pub fn with_mean(&self, mean: f64) -> Result<ArrivalProcess> {
        let process = match *self {
            ArrivalFamily::Binomial { trials } => ArrivalProcess::Binomial { trials, mean },
            ArrivalFamily::Bernoulli => ArrivalProcess::Bernoulli { mean },
            ArrivalFamily::Deterministic => {
                if mean < 0.0 || mean.fract() != 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "deterministic arrivals need a whole number per slot, got {mean}"
                    )));
                }
                ArrivalProcess::Deterministic { count: mean as u64 }
            }
            ArrivalFamily::Zero => ArrivalProcess::Zero,
        };
        process.validate()?;
        Ok(process)
    }
}
