use crate::arrivals::{ArrivalFamily, ArrivalProcess};
use crate::channel::{EstimatorSpec, ModelSpec};
use crate::error::{Error, Result};
use crate::policy::Rounding;

use super::config::{ArrivalSpec, ExperimentConfig, ModelSource, PolicySpec, QosSpec, QosUser};

pub const PRESET_NAMES: [&str; 4] = ["fig1", "fig2", "fig3", "example3a"];

/// Single user, two channels with states {0, 2} and {0, 6}, rounded-average feedback.
pub fn two_channel_model() -> ModelSpec {
    ModelSpec {
        users: 1,
        channels: 2,
        state_space: vec![0, 2, 6],
        marginals: vec![vec![vec![0.5, 0.5, 0.0], vec![0.5, 0.0, 0.5]]],
        estimator: EstimatorSpec::AvgFloor,
    }
}

/// Ten users, six ON/OFF channels with P(on) = 1/2, sum feedback.
pub fn on_off_model() -> ModelSpec {
    ModelSpec::symmetric(10, 6, vec![0, 1], vec![0.5, 0.5], EstimatorSpec::Sum)
}

/// `users` users, six channels uniform on {0, 1, 2, 3}, sum feedback.
pub fn multi_rate_model(users: usize) -> ModelSpec {
    ModelSpec::symmetric(users, 6, vec![0, 1, 2, 3], vec![0.25; 4], EstimatorSpec::Sum)
}

fn binomial_sweep(means: Vec<f64>) -> ArrivalSpec {
    ArrivalSpec {
        family: ArrivalFamily::Binomial { trials: 10 },
        means,
        shares: None,
    }
}

fn grid(start: f64, step: f64, count: usize) -> Vec<f64> {
    // Rounded so the CSV shows the intended decimals.
    (0..count)
        .map(|k| ((start + step * k as f64) * 1e6).round() / 1e6)
        .collect()
}

fn base(name: &str, model: ModelSpec, policies: Vec<PolicySpec>, arrivals: ArrivalSpec) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        model: ModelSource::Inline(model),
        policies,
        arrivals,
        horizon: 100_000,
        full_horizon: Some(1_000_000),
        warmup_fraction: 0.1,
        seeds: vec![1],
        qos: None,
        initial_backlog: None,
        output: None,
        base_dir: None,
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    match name {
        "example3a" => Ok(base(
            name,
            two_channel_model(),
            vec![
                PolicySpec::Mw,
                PolicySpec::NaiveMw {
                    rounding: Rounding::Floor,
                },
            ],
            binomial_sweep(vec![0.5, 1.0, 1.5, 2.0, 3.0, 3.5, 3.9]),
        )),
        "fig1" => {
            let mut means = vec![0.01];
            means.extend(grid(0.05, 0.05, 10));
            Ok(base(
                name,
                on_off_model(),
                vec![
                    PolicySpec::Mw,
                    PolicySpec::Imw,
                    PolicySpec::NaiveMw {
                        rounding: Rounding::Floor,
                    },
                    PolicySpec::NaiveImw {
                        rounding: Rounding::Floor,
                    },
                ],
                binomial_sweep(means),
            ))
        }
        "fig2" => Ok(base(
            name,
            multi_rate_model(10),
            vec![
                PolicySpec::Mw,
                PolicySpec::Imw,
                PolicySpec::NaiveMw {
                    rounding: Rounding::Ceil,
                },
                PolicySpec::NaiveImw {
                    rounding: Rounding::Ceil,
                },
            ],
            binomial_sweep(grid(0.05, 0.05, 20)),
        )),
        "fig3" => {
            let mut users = vec![
                QosUser::RealTime {
                    drop_ratio: 0.01,
                    arrivals: ArrivalProcess::Binomial {
                        trials: 10,
                        mean: 2.75,
                    },
                },
                QosUser::RealTime {
                    drop_ratio: 0.02,
                    arrivals: ArrivalProcess::Binomial {
                        trials: 10,
                        mean: 2.75,
                    },
                },
                QosUser::RateGuaranteed { min_rate: 5.0 },
                QosUser::RateGuaranteed { min_rate: 2.0 },
                QosUser::RateGuaranteed { min_rate: 1.0 },
            ];
            users.extend(std::iter::repeat_n(QosUser::BestEffort, 10));
            let mut means = vec![0.18, 0.5];
            means.extend((1..=10).map(f64::from));
            let mut config = base(
                name,
                multi_rate_model(15),
                vec![PolicySpec::Qmw],
                binomial_sweep(means),
            );
            config.horizon = 500_000;
            config.full_horizon = Some(5_000_000);
            config.qos = Some(QosSpec {
                frame_len: 10,
                users,
            });
            Ok(config)
        }
        other => Err(Error::UnknownPreset(other.into())),
    }
}
