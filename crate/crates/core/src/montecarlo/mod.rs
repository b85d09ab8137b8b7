//! Seeded Euler–Maruyama simulation of `(X_t, Λ_t)` with interval-based
//! switching, and estimators that probe the stability and recurrence
//! definitions over a finite horizon.
//!
//! Every path draws its randomness from its own ChaCha stream, selected by
//! `(base_seed, path_index)`, and results are reduced in path order, so
//! estimates are bitwise identical for any number of workers.

mod engine;
mod estimators;
mod stats;

pub use engine::{simulate_path, PathSample, SwitchEvent, EXPLOSION_RADIUS};
pub use estimators::{
    estimate_convergence, estimate_return_probability, estimate_sup_exceedance, moment_growth_check,
    occupation_fractions, MomentGrowth, OccupationEstimate,
};
pub use stats::{wilson_interval, MCEstimate, WILSON_Z};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `dt · q_i(x)` above which per-step Bernoulli switching is flagged.
pub const BERNOULLI_WARN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchingScheme {
    /// Exponential clocks with rates frozen at the start of each step; a
    /// step is split at every switch.
    #[default]
    FrozenRateExponential,
    /// Switch to `j` with probability `q_ij(x) dt` at the end of each step.
    PerStepBernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub scheme: SwitchingScheme,
    /// Worker threads; `0` uses the global pool. Never affects results.
    #[serde(default)]
    pub workers: usize,
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, base_seed: u64) -> Self {
        Self { dt, horizon, n_paths, base_seed, scheme: SwitchingScheme::default(), workers: 0 }
    }

    pub fn with_scheme(mut self, scheme: SwitchingScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Validation(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return Err(Error::Validation(format!("horizon {} must be at least dt = {}", self.horizon, self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::Validation("number of paths must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land on the horizon.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub(crate) fn step_length(&self, k: usize) -> f64 {
        let n = self.steps();
        if k + 1 < n {
            self.dt
        } else {
            self.horizon - (n - 1) as f64 * self.dt
        }
    }

    pub(crate) fn time_at(&self, k: usize) -> f64 {
        if k >= self.steps() {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }
}

/// Runs `f` over path indices `0..n` and returns results in index order.
pub(crate) fn map_paths<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let run = || (0..n as u64).into_par_iter().map(&f).collect::<Vec<T>>();
        if workers == 0 {
            return run();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(run),
            Err(_) => (0..n as u64).map(&f).collect(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        (0..n as u64).map(f).collect()
    }
}
