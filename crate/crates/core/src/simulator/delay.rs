use serde::{Deserialize, Serialize};

use crate::model::Nanos;

/// Distribution of a delay. Every model has a finite upper bound and a
/// lower bound of zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayModel {
    Constant(Nanos),
    Uniform { hi: Nanos },
    /// Exponential with the given mean, truncated to `[0, cap]`.
    Exponential { mean: Nanos, cap: Nanos },
    /// Resampled uniformly from recorded values.
    Empirical(Vec<Nanos>),
}

/// Default truncation of exponential delays, as a multiple of the mean.
pub const DEFAULT_CAP_FACTOR: u64 = 10;

impl DelayModel {
    pub fn exponential(mean: Nanos) -> Self {
        DelayModel::Exponential {
            mean,
            cap: mean * DEFAULT_CAP_FACTOR,
        }
    }

    /// Largest value a sample can take.
    pub fn upper_bound(&self) -> Nanos {
        match self {
            DelayModel::Constant(v) => *v,
            DelayModel::Uniform { hi } => *hi,
            DelayModel::Exponential { cap, .. } => *cap,
            DelayModel::Empirical(values) => values.iter().copied().max().unwrap_or_default(),
        }
    }

    /// Analytic mean in nanoseconds (for the truncated exponential, the
    /// mean of the conditional distribution on `[0, cap]`).
    pub fn mean(&self) -> f64 {
        match self {
            DelayModel::Constant(v) => v.0 as f64,
            DelayModel::Uniform { hi } => hi.0 as f64 / 2.0,
            DelayModel::Exponential { mean, cap } => {
                let (m, c) = (mean.0 as f64, cap.0 as f64);
                if m == 0.0 {
                    return 0.0;
                }
                let tail = (-c / m).exp();
                m - c * tail / (1.0 - tail)
            }
            DelayModel::Empirical(values) if values.is_empty() => 0.0,
            DelayModel::Empirical(values) => {
                values.iter().map(|v| v.0 as f64).sum::<f64>() / values.len() as f64
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            DelayModel::Exponential { mean, cap } if cap < mean => {
                Err(format!("exponential cap {cap} is below its mean {mean}"))
            }
            DelayModel::Empirical(values) if values.is_empty() => {
                Err("empirical delay model has no samples".to_string())
            }
            _ => Ok(()),
        }
    }
}
