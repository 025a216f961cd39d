//! Non-increasing sequences `alpha_i = 1 + beta_i` driving A-CMAX++.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("beta1 must be finite and nonnegative, got {0}")]
    BadBeta(f64),
    #[error("rho must lie in [0, 1), got {0}")]
    BadRho(f64),
    #[error("constant alpha must be at least 1, got {0}")]
    BadAlpha(f64),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

fn default_horizon() -> usize {
    200
}

fn default_nav_beta() -> f64 {
    100.0
}

fn default_nav_decrement() -> f64 {
    2.5
}

fn default_nav_every() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlphaSchedule {
    Constant {
        alpha: f64,
    },
    /// `beta_{i+1} = rho * beta_i`.
    Exponential {
        beta1: f64,
        rho: f64,
    },
    /// Decreases by a constant so that `beta_horizon = 0`.
    Linear {
        beta1: f64,
        #[serde(default = "default_horizon")]
        horizon: usize,
    },
    /// `beta_i = beta1 / i`.
    TimeDecay {
        beta1: f64,
    },
    /// `beta_{i+1} = beta_i - beta1 * every / horizon` when `i` is a
    /// multiple of `every`.
    Step {
        beta1: f64,
        every: usize,
        #[serde(default = "default_horizon")]
        horizon: usize,
    },
    /// `beta1` decreased by `decrement` after every `every` repetitions.
    PaperNav {
        #[serde(default = "default_nav_beta")]
        beta1: f64,
        #[serde(default = "default_nav_decrement")]
        decrement: f64,
        #[serde(default = "default_nav_every")]
        every: usize,
    },
}

impl AlphaSchedule {
    pub fn paper_nav() -> Self {
        AlphaSchedule::PaperNav {
            beta1: default_nav_beta(),
            decrement: default_nav_decrement(),
            every: default_nav_every(),
        }
    }

    pub fn constant(alpha: f64) -> Self {
        AlphaSchedule::Constant { alpha }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let beta = |b: f64| {
            if b.is_finite() && b >= 0.0 {
                Ok(())
            } else {
                Err(ScheduleError::BadBeta(b))
            }
        };
        let positive = |n: usize, name| {
            if n > 0 {
                Ok(())
            } else {
                Err(ScheduleError::NonPositive(name))
            }
        };
        match *self {
            AlphaSchedule::Constant { alpha } => {
                if alpha >= 1.0 {
                    Ok(())
                } else {
                    Err(ScheduleError::BadAlpha(alpha))
                }
            }
            AlphaSchedule::Exponential { beta1, rho } => {
                beta(beta1)?;
                if (0.0..1.0).contains(&rho) {
                    Ok(())
                } else {
                    Err(ScheduleError::BadRho(rho))
                }
            }
            AlphaSchedule::Linear { beta1, horizon } => {
                beta(beta1)?;
                positive(horizon, "horizon")
            }
            AlphaSchedule::TimeDecay { beta1 } => beta(beta1),
            AlphaSchedule::Step {
                beta1,
                every,
                horizon,
            } => {
                beta(beta1)?;
                positive(every, "step frequency")?;
                positive(horizon, "horizon")
            }
            AlphaSchedule::PaperNav {
                beta1,
                decrement,
                every,
            } => {
                beta(beta1)?;
                beta(decrement)?;
                positive(every, "step frequency")
            }
        }
    }

    /// `beta_i` for repetition `i >= 1`.
    pub fn beta(&self, i: usize) -> f64 {
        assert!(i >= 1, "repetitions are numbered from 1");
        let k = (i - 1) as f64;
        let b = match *self {
            AlphaSchedule::Constant { alpha } => alpha - 1.0,
            AlphaSchedule::Exponential { beta1, rho } => beta1 * rho.powf(k),
            AlphaSchedule::Linear { beta1, horizon } => {
                if horizon <= 1 {
                    0.0
                } else {
                    beta1 - beta1 / (horizon - 1) as f64 * k
                }
            }
            AlphaSchedule::TimeDecay { beta1 } => beta1 / i as f64,
            AlphaSchedule::Step {
                beta1,
                every,
                horizon,
            } => {
                let delta = beta1 * every as f64 / horizon as f64;
                beta1 - delta * ((i - 1) / every) as f64
            }
            AlphaSchedule::PaperNav {
                beta1,
                decrement,
                every,
            } => beta1 - decrement * ((i - 1) / every) as f64,
        };
        b.max(0.0)
    }

    pub fn alpha(&self, i: usize) -> f64 {
        1.0 + self.beta(i)
    }

    pub fn name(&self) -> String {
        match self {
            AlphaSchedule::Constant { alpha } => format!("constant-{alpha}"),
            AlphaSchedule::Exponential { beta1, rho } => format!("exponential-{beta1}-{rho}"),
            AlphaSchedule::Linear { beta1, .. } => format!("linear-{beta1}"),
            AlphaSchedule::TimeDecay { beta1 } => format!("time-decay-{beta1}"),
            AlphaSchedule::Step { beta1, every, .. } => format!("step-{beta1}-{every}"),
            AlphaSchedule::PaperNav { .. } => "paper-nav".to_string(),
        }
    }
}
