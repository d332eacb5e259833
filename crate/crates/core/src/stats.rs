//! Binomial frequency summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("need 0 <= failures <= trials and trials >= 1, got {failures}/{trials}")]
pub struct StatsError {
    pub failures: u64,
    pub trials: u64,
}

/// Wilson score interval for a binomial proportion, clamped to `[0, 1]`.
pub fn wilson_interval(failures: u64, trials: u64, z: f64) -> Result<(f64, f64), StatsError> {
    if trials == 0 || failures > trials {
        return Err(StatsError { failures, trials });
    }
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let mut lo = (centre - half).max(0.0);
    let mut hi = (centre + half).min(1.0);
    if failures == 0 {
        lo = 0.0;
    }
    if failures == trials {
        hi = 1.0;
    }
    Ok((lo, hi))
}

/// Event count over independent trials with its 95% Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub trials: u64,
    pub events: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl MonteCarloReport {
    pub fn new(events: u64, trials: u64) -> Result<Self, StatsError> {
        let (ci_lo, ci_hi) = wilson_interval(events, trials, 1.96)?;
        Ok(Self {
            trials,
            events,
            estimate: events as f64 / trials as f64,
            ci_lo,
            ci_hi,
        })
    }

    /// Binomial standard deviation of the estimate.
    pub fn sigma(&self) -> f64 {
        let p = self.estimate;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}
