use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{SimConfig, SwitchingScheme};
use crate::chain::IntervalTable;
use crate::geometry::norm;
use crate::scenario::ScenarioModel;
use crate::{Error, Result};

/// Paths leaving this ball are stopped and counted as escapes.
pub const EXPLOSION_RADIUS: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub time: f64,
    pub from: usize,
    pub to: usize,
}

/// One recorded trajectory on the step grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub regimes: Vec<usize>,
    pub switches: Vec<SwitchEvent>,
    pub seed: u64,
    pub path_index: u64,
}

pub(crate) fn path_rng(base_seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(path_index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StepOutcome {
    Running,
    Exploded,
}

/// Mutable state of one path.
pub(crate) struct Stepper<'a> {
    model: &'a ScenarioModel,
    config: &'a SimConfig,
    rng: ChaCha8Rng,
    pub x: Vec<f64>,
    pub regime: usize,
    pub time: f64,
    /// Unused part of the current unit-exponential hazard budget.
    budget: f64,
    drift: Vec<f64>,
    sigma: Vec<f64>,
    noise: Vec<f64>,
    row: Vec<(usize, f64)>,
    pub zero_hits: usize,
    pub max_rate_dt: f64,
    pub switches: Option<Vec<SwitchEvent>>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        model: &'a ScenarioModel,
        config: &'a SimConfig,
        x0: &[f64],
        i0: usize,
        path_index: u64,
        record_switches: bool,
    ) -> Result<Self> {
        let d = model.dimension;
        if x0.len() != d {
            return Err(Error::Shape(format!("initial state has {} entries, model dimension is {d}", x0.len())));
        }
        if i0 >= model.num_regimes() {
            return Err(Error::Domain(format!("initial regime {i0} out of range")));
        }
        let mut rng = path_rng(config.base_seed, path_index);
        let budget = rng.sample(Exp1);
        Ok(Self {
            model,
            config,
            rng,
            x: x0.to_vec(),
            regime: i0,
            time: 0.0,
            budget,
            drift: vec![0.0; d],
            sigma: vec![0.0; d * d],
            noise: vec![0.0; d],
            row: Vec::new(),
            zero_hits: 0,
            max_rate_dt: 0.0,
            switches: record_switches.then(Vec::new),
        })
    }

    fn euler(&mut self, h: f64) -> StepOutcome {
        let d = self.model.dimension;
        self.model.drift.eval(&self.x, self.regime, &mut self.drift);
        self.model.diffusion.eval(&self.x, self.regime, &mut self.sigma);
        let sqrt_h = h.sqrt();
        for k in 0..d {
            self.noise[k] = self.rng.sample::<f64, _>(StandardNormal) * sqrt_h;
        }
        for k in 0..d {
            let mut dx = self.drift[k] * h;
            for l in 0..d {
                dx += self.sigma[k * d + l] * self.noise[l];
            }
            self.x[k] += dx;
        }
        self.time += h;
        if self.x.iter().all(|v| *v == 0.0) {
            self.zero_hits += 1;
        }
        if self.x.iter().any(|v| !v.is_finite()) || norm(&self.x) > EXPLOSION_RADIUS {
            StepOutcome::Exploded
        } else {
            StepOutcome::Running
        }
    }

    fn exit_rate(&mut self) -> f64 {
        self.model.generator.row_into(&self.x, self.regime, &mut self.row);
        self.row.iter().map(|(_, q)| q).sum()
    }

    fn switch_to(&mut self, to: usize) {
        if let Some(s) = self.switches.as_mut() {
            s.push(SwitchEvent { time: self.time, from: self.regime, to });
        }
        self.regime = to;
    }

    /// Advances by `h`.
    pub fn step(&mut self, h: f64) -> Result<StepOutcome> {
        match self.config.scheme {
            SwitchingScheme::FrozenRateExponential => self.step_exponential(h),
            SwitchingScheme::PerStepBernoulli => self.step_bernoulli(h),
        }
    }

    fn step_exponential(&mut self, h: f64) -> Result<StepOutcome> {
        let mut remaining = h;
        loop {
            let q = self.exit_rate();
            self.max_rate_dt = self.max_rate_dt.max(q * h);
            let hazard = q * remaining;
            if !(q > 0.0) || self.budget >= hazard {
                self.budget -= hazard.max(0.0);
                return Ok(self.euler(remaining));
            }
            let tau = self.budget / q;
            if self.euler(tau) == StepOutcome::Exploded {
                return Ok(StepOutcome::Exploded);
            }
            remaining -= tau;
            // Target drawn from the rates at the firing state.
            let total = self.exit_rate();
            if total > 0.0 {
                let u = self.rng.random::<f64>() * total;
                let table = IntervalTable::from_row(self.regime, &self.row);
                let to = table.locate(u).unwrap_or_else(|| table.intervals.last().map_or(self.regime, |iv| iv.0));
                self.switch_to(to);
            }
            self.budget = self.rng.sample(Exp1);
            if remaining <= 0.0 {
                return Ok(StepOutcome::Running);
            }
        }
    }

    fn step_bernoulli(&mut self, h: f64) -> Result<StepOutcome> {
        let q = self.exit_rate();
        let p = q * h;
        self.max_rate_dt = self.max_rate_dt.max(p);
        if p > 1.0 {
            return Err(Error::Validation(format!(
                "dt · q_i(x) = {p} exceeds 1 at regime {}; per-step switching needs a smaller step",
                self.regime
            )));
        }
        let u = self.rng.random::<f64>();
        let target = if u < p {
            IntervalTable::from_row(self.regime, &self.row).locate(u / h)
        } else {
            None
        };
        let outcome = self.euler(h);
        if let Some(to) = target {
            self.switch_to(to);
        }
        Ok(outcome)
    }
}

/// Simulates one path on the step grid and records every state.
pub fn simulate_path(model: &ScenarioModel, x0: &[f64], i0: usize, config: &SimConfig, path_index: u64) -> Result<PathSample> {
    config.validate()?;
    let mut s = Stepper::new(model, config, x0, i0, path_index, true)?;
    let n = config.steps();
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut regimes = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(s.x.clone());
    regimes.push(s.regime);
    for k in 0..n {
        if s.step(config.step_length(k))? == StepOutcome::Exploded {
            return Err(Error::ExplosionDetected { path: path_index, step: k + 1 });
        }
        times.push(config.time_at(k + 1));
        states.push(s.x.clone());
        regimes.push(s.regime);
    }
    Ok(PathSample {
        times,
        states,
        regimes,
        switches: s.switches.take().unwrap_or_default(),
        seed: config.base_seed,
        path_index,
    })
}
