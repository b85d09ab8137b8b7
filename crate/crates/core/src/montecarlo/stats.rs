use serde::{Deserialize, Serialize};

use super::{SimConfig, SwitchingScheme};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959963984540054;

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    // The bounds are exactly 0 or 1 at the extremes; pin them against rounding.
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// A Monte Carlo proportion with its 95% Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub estimator: String,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub successes: usize,
    pub n_paths: usize,
    /// Paths stopped by the explosion guard (counted as events).
    pub explosions: usize,
    /// Recorded states equal to the origin.
    pub zero_hits: usize,
    pub dt: f64,
    pub horizon: f64,
    pub scheme: SwitchingScheme,
    pub seed: u64,
    pub notes: Vec<String>,
}

impl MCEstimate {
    pub(crate) fn from_counts(estimator: &str, successes: usize, config: &SimConfig) -> Self {
        let n = config.n_paths;
        let (ci_low, ci_high) = wilson_interval(successes, n, WILSON_Z);
        Self {
            estimator: estimator.to_string(),
            estimate: successes as f64 / n as f64,
            ci_low,
            ci_high,
            successes,
            n_paths: n,
            explosions: 0,
            zero_hits: 0,
            dt: config.dt,
            horizon: config.horizon,
            scheme: config.scheme,
            seed: config.base_seed,
            notes: Vec::new(),
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}
