use serde::{Deserialize, Serialize};

use super::engine::{StepOutcome, Stepper};
use super::{map_paths, MCEstimate, SimConfig, BERNOULLI_WARN};
use crate::geometry::norm;
use crate::linalg::pairwise_sum;
use crate::scenario::ScenarioModel;
use crate::{Error, Result};

struct PathOutcome {
    event: bool,
    exploded: bool,
    zero_hits: usize,
    max_rate_dt: f64,
}

/// Runs every path with `body` deciding the event, and reduces in path order.
fn run_proportion<F>(
    name: &str,
    model: &ScenarioModel,
    x0: &[f64],
    i0: usize,
    config: &SimConfig,
    body: F,
) -> Result<MCEstimate>
where
    F: Fn(&mut Stepper) -> Result<(bool, bool)> + Sync + Send,
{
    config.validate()?;
    let outcomes = map_paths(config.n_paths, config.workers, |idx| -> Result<PathOutcome> {
        let mut s = Stepper::new(model, config, x0, i0, idx, false)?;
        let (event, exploded) = body(&mut s)?;
        Ok(PathOutcome { event, exploded, zero_hits: s.zero_hits, max_rate_dt: s.max_rate_dt })
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let successes = outcomes.iter().filter(|o| o.event).count();
    let mut est = MCEstimate::from_counts(name, successes, config);
    est.explosions = outcomes.iter().filter(|o| o.exploded).count();
    est.zero_hits = outcomes.iter().map(|o| o.zero_hits).sum();
    let max_rate_dt = outcomes.iter().map(|o| o.max_rate_dt).fold(0.0, f64::max);
    est.notes.push(format!("horizon-{} proxy for an event over all t ≥ 0", config.horizon));
    if max_rate_dt > BERNOULLI_WARN {
        est.notes.push(format!("dt · max q_i(x) = {max_rate_dt} exceeds {BERNOULLI_WARN}; switching is coarse"));
    }
    if est.explosions > 0 {
        est.notes.push(format!("{} paths left |x| ≤ 1e12 and were stopped", est.explosions));
    }
    Ok(est)
}

/// Fraction of paths with `sup_{t ≤ T} |X_t| > ε`; exploded paths count as
/// exceedances. A lower bound for the untruncated probability.
pub fn estimate_sup_exceedance(model: &ScenarioModel, x0: &[f64], i0: usize, eps: f64, config: &SimConfig) -> Result<MCEstimate> {
    if !(eps > norm(x0)) {
        return Err(Error::Domain(format!("ε = {eps} must exceed |x0| = {}", norm(x0))));
    }
    run_proportion("sup_exceedance", model, x0, i0, config, |s| {
        for k in 0..config.steps() {
            if s.step(config.step_length(k))? == StepOutcome::Exploded {
                return Ok((true, true));
            }
            if norm(&s.x) > eps {
                return Ok((true, false));
            }
        }
        Ok((false, false))
    })
}

/// Fraction of paths with `|X_T| < δ`.
pub fn estimate_convergence(model: &ScenarioModel, x0: &[f64], i0: usize, delta: f64, config: &SimConfig) -> Result<MCEstimate> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("δ = {delta} must be positive")));
    }
    run_proportion("convergence", model, x0, i0, config, |s| {
        for k in 0..config.steps() {
            if s.step(config.step_length(k))? == StepOutcome::Exploded {
                return Ok((false, true));
            }
        }
        Ok((norm(&s.x) < delta, false))
    })
}

/// Fraction of paths entering `{|x| ≤ r0} × {0, …, m0 - 1}` before `T`.
pub fn estimate_return_probability(
    model: &ScenarioModel,
    x0: &[f64],
    i0: usize,
    r0: f64,
    m0: usize,
    config: &SimConfig,
) -> Result<MCEstimate> {
    if !(norm(x0) > r0) {
        return Err(Error::Domain(format!("|x0| = {} must exceed r0 = {r0}", norm(x0))));
    }
    if m0 == 0 {
        return Err(Error::Domain("target set needs at least one regime".into()));
    }
    run_proportion("return_probability", model, x0, i0, config, |s| {
        for k in 0..config.steps() {
            if s.step(config.step_length(k))? == StepOutcome::Exploded {
                return Ok((false, true));
            }
            if s.regime < m0 && norm(&s.x) <= r0 {
                return Ok((true, false));
            }
        }
        Ok((false, false))
    })
}

/// Least-squares fit of `log Ê|X_t|^p` against `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentGrowth {
    pub p: f64,
    pub times: Vec<f64>,
    pub log_moments: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub n_paths: usize,
    /// Paths excluded after leaving the explosion guard.
    pub explosions: usize,
    pub seed: u64,
}

pub fn moment_growth_check(
    model: &ScenarioModel,
    p: f64,
    x0: &[f64],
    i0: usize,
    time_grid: &[f64],
    config: &SimConfig,
) -> Result<MomentGrowth> {
    config.validate()?;
    if p == 0.0 || !p.is_finite() {
        return Err(Error::Domain("moment order must be finite and nonzero".into()));
    }
    if norm(x0) == 0.0 {
        return Err(Error::Domain("initial state must be nonzero".into()));
    }
    if time_grid.len() < 2 {
        return Err(Error::Domain("need at least two times to fit a slope".into()));
    }
    let steps = config.steps();
    let mut marks = Vec::with_capacity(time_grid.len());
    for &t in time_grid {
        if !(t >= 0.0) || t > config.horizon + 1e-12 {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", config.horizon)));
        }
        marks.push(((t / config.dt).round() as usize).min(steps));
    }
    let per_path = map_paths(config.n_paths, config.workers, |idx| -> Result<Option<Vec<f64>>> {
        let mut s = Stepper::new(model, config, x0, i0, idx, false)?;
        let mut values = vec![0.0; marks.len()];
        let mut k = 0;
        for (slot, &mark) in marks.iter().enumerate() {
            while k < mark {
                if s.step(config.step_length(k))? == StepOutcome::Exploded {
                    return Ok(None);
                }
                k += 1;
            }
            values[slot] = norm(&s.x).powf(p);
        }
        Ok(Some(values))
    });
    let per_path = per_path.into_iter().collect::<Result<Vec<_>>>()?;
    let survivors: Vec<&Vec<f64>> = per_path.iter().flatten().collect();
    if survivors.is_empty() {
        return Err(Error::Numerical("every path exploded".into()));
    }
    let times: Vec<f64> = marks.iter().map(|&m| config.time_at(m)).collect();
    let log_moments: Vec<f64> = (0..marks.len())
        .map(|slot| {
            let column: Vec<f64> = survivors.iter().map(|v| v[slot]).collect();
            (pairwise_sum(&column) / column.len() as f64).ln()
        })
        .collect();
    let (slope, intercept) = least_squares(&times, &log_moments);
    Ok(MomentGrowth {
        p,
        times,
        log_moments,
        slope,
        intercept,
        n_paths: config.n_paths,
        explosions: per_path.len() - survivors.len(),
        seed: config.base_seed,
    })
}

fn least_squares(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mt)
}

/// Mean fraction of time spent in each regime, with standard errors across paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationEstimate {
    pub fractions: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_paths: usize,
}

pub fn occupation_fractions(model: &ScenarioModel, x0: &[f64], i0: usize, config: &SimConfig) -> Result<OccupationEstimate> {
    config.validate()?;
    let n_reg = model.num_regimes();
    let per_path = map_paths(config.n_paths, config.workers, |idx| -> Result<Vec<f64>> {
        let mut s = Stepper::new(model, config, x0, i0, idx, false)?;
        let mut time_in = vec![0.0; n_reg];
        for k in 0..config.steps() {
            let h = config.step_length(k);
            if s.step(h)? == StepOutcome::Exploded {
                return Err(Error::ExplosionDetected { path: idx, step: k + 1 });
            }
            time_in[s.regime] += h;
        }
        time_in.iter_mut().for_each(|v| *v /= config.horizon);
        Ok(time_in)
    });
    let per_path = per_path.into_iter().collect::<Result<Vec<_>>>()?;
    let n = per_path.len() as f64;
    let mut fractions = Vec::with_capacity(n_reg);
    let mut std_errors = Vec::with_capacity(n_reg);
    for r in 0..n_reg {
        let col: Vec<f64> = per_path.iter().map(|v| v[r]).collect();
        let mean = pairwise_sum(&col) / n;
        let dev: Vec<f64> = col.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if n > 1.0 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
        fractions.push(mean);
        std_errors.push((var / n).sqrt());
    }
    Ok(OccupationEstimate { fractions, std_errors, n_paths: per_path.len() })
}
