//! Delay sampling and tail-latency analysis of delay traces.

use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::model::{Nanos, TimeUnit};
use crate::simulator::DelayModel;

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("trace `{0}` has no samples")]
    EmptyTrace(String),
    #[error("percentile {0} is outside (0, 1]")]
    BadPercentile(f64),
    #[error("trace `{0}` has zero mean")]
    ZeroMean(String),
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Delay samples from one source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelayTrace {
    pub label: String,
    pub samples: Vec<Nanos>,
}

impl DelayTrace {
    pub fn new(label: impl Into<String>, samples: Vec<Nanos>) -> Self {
        DelayTrace {
            label: label.into(),
            samples,
        }
    }

    /// One decimal millisecond value per line; blank lines and `#` comments
    /// are skipped.
    pub fn parse(label: &str, text: &str) -> Result<Self, StatsError> {
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let v = Nanos::parse_decimal(line, TimeUnit::Ms).map_err(|e| StatsError::Parse {
                path: label.to_string(),
                line: i + 1,
                reason: e.to_string(),
            })?;
            samples.push(v);
        }
        Ok(DelayTrace::new(label, samples))
    }

    pub fn load(path: &Path) -> Result<Self, StatsError> {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let text = std::fs::read_to_string(path).map_err(|source| StatsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&label, &text)
    }

    pub fn mean(&self) -> Result<f64, StatsError> {
        if self.samples.is_empty() {
            return Err(StatsError::EmptyTrace(self.label.clone()));
        }
        let total: u128 = self.samples.iter().map(|s| s.0 as u128).sum();
        Ok(total as f64 / self.samples.len() as f64)
    }
}

/// Nearest-rank percentile: the `ceil(p·n)`-th smallest sample.
pub fn percentile(trace: &DelayTrace, p: f64) -> Result<Nanos, StatsError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(StatsError::BadPercentile(p));
    }
    if trace.samples.is_empty() {
        return Err(StatsError::EmptyTrace(trace.label.clone()));
    }
    let mut sorted = trace.samples.clone();
    sorted.sort_unstable();
    Ok(sorted[nearest_rank(p, sorted.len()) - 1])
}

fn nearest_rank(p: f64, n: usize) -> usize {
    // absorb representation error such as 0.999 * 1000 = 998.9999...
    let rank = (p * n as f64 - 1e-9).ceil() as usize;
    rank.clamp(1, n)
}

/// Ratio of the `p` percentile to the mean.
pub fn tail_ratio(trace: &DelayTrace, p: f64) -> Result<f64, StatsError> {
    let mean = trace.mean()?;
    if mean == 0.0 {
        return Err(StatsError::ZeroMean(trace.label.clone()));
    }
    Ok(percentile(trace, p)?.0 as f64 / mean)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub label: String,
    pub p: f64,
    pub percentile: Nanos,
    pub mean: f64,
    pub ratio: f64,
}

pub fn analyze(trace: &DelayTrace, ps: &[f64]) -> Result<Vec<TailRow>, StatsError> {
    let mean = trace.mean()?;
    ps.iter()
        .map(|&p| {
            Ok(TailRow {
                label: trace.label.clone(),
                p,
                percentile: percentile(trace, p)?,
                mean,
                ratio: tail_ratio(trace, p)?,
            })
        })
        .collect()
}

/// Draws one delay. Exponential samples come from the inverse CDF of the
/// distribution conditioned on `[0, cap]`, so they never exceed the cap.
pub fn sample<R: Rng + ?Sized>(model: &DelayModel, rng: &mut R) -> Nanos {
    match model {
        DelayModel::Constant(v) => *v,
        DelayModel::Uniform { hi } => Nanos(rng.gen_range(0..=hi.0)),
        DelayModel::Exponential { mean, cap } => {
            if mean.0 == 0 {
                return Nanos::ZERO;
            }
            let m = mean.0 as f64;
            let mass = 1.0 - (-(cap.0 as f64) / m).exp();
            let u: f64 = rng.gen();
            let x = -m * (1.0 - u * mass).ln();
            Nanos((x.round() as u64).min(cap.0))
        }
        DelayModel::Empirical(values) => values[rng.gen_range(0..values.len())],
    }
}
