use serde::{Deserialize, Serialize};

use super::weighted_rate;
use crate::chain::{stationary_distribution, ProbabilityVector};
use crate::geometry::SphereGrid;
use crate::scenario::ScenarioModel;
use crate::verdict::{Certificate, Criterion, NonlinearCertificate, Verdict, VerdictKind};
use crate::{Error, Result};

/// Exponents closer than this to `γ = 2ζ - 1` count as the balanced case.
const BALANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereCase {
    /// `γ < 2ζ - 1`: the drift dominates near the origin.
    DriftDominated,
    /// `γ = 2ζ - 1`: drift and diffusion enter at the same order.
    Balanced,
}

/// Per-regime sup (`beta`) and inf (`beta_tilde`) of the leading-order
/// sphere functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereRates {
    pub case: SphereCase,
    pub drift_exponent: f64,
    pub diffusion_exponent: f64,
    pub directions: usize,
    pub beta: Vec<f64>,
    pub beta_tilde: Vec<f64>,
}

fn classify(gamma: f64, zeta: f64) -> Result<SphereCase> {
    if !(gamma > 1.0) {
        return Err(Error::Domain(format!("drift exponent {gamma} must exceed 1")));
    }
    let critical = 2.0 * zeta - 1.0;
    if (gamma - critical).abs() <= BALANCE_TOL * critical.abs().max(1.0) {
        Ok(SphereCase::Balanced)
    } else if gamma < critical {
        Ok(SphereCase::DriftDominated)
    } else {
        Err(Error::NotApplicable(format!("drift exponent {gamma} exceeds 2ζ - 1 = {critical}")))
    }
}

/// Sphere rates from explicit shapes `b̂(θ, i)` (length `d`) and `σ̂(θ, i)`
/// (row-major `d × d`). Sums run over the `d` coordinates.
#[allow(clippy::too_many_arguments)]
pub fn sphere_rates_with<B, S>(
    b_hat: B,
    sigma_hat: S,
    gamma: f64,
    zeta: f64,
    dimension: usize,
    num_regimes: usize,
    grid: &SphereGrid,
) -> Result<SphereRates>
where
    B: Fn(&[f64], usize, &mut [f64]),
    S: Fn(&[f64], usize, &mut [f64]),
{
    let case = classify(gamma, zeta)?;
    if grid.dimension() != dimension || grid.is_empty() {
        return Err(Error::Shape(format!("sphere grid does not cover S^{}", dimension.saturating_sub(1))));
    }
    let d = dimension;
    let mut b = vec![0.0; d];
    let mut s = vec![0.0; d * d];
    let mut beta = vec![f64::NEG_INFINITY; num_regimes];
    let mut beta_tilde = vec![f64::INFINITY; num_regimes];
    for i in 0..num_regimes {
        for theta in grid.iter() {
            b_hat(theta, i, &mut b);
            let mut value: f64 = b.iter().zip(theta).map(|(bk, tk)| bk * tk).sum();
            if case == SphereCase::Balanced {
                sigma_hat(theta, i, &mut s);
                let a = crate::scenario::sigma_sigma_t(&s, d);
                let mut quad = 0.0;
                for k in 0..d {
                    for l in 0..d {
                        let delta = if k == l { 1.0 } else { 0.0 };
                        quad += a[k * d + l] * (delta - 2.0 * theta[k] * theta[l]);
                    }
                }
                value += 0.5 * quad;
            }
            beta[i] = beta[i].max(value);
            beta_tilde[i] = beta_tilde[i].min(value);
        }
    }
    Ok(SphereRates {
        case,
        drift_exponent: gamma,
        diffusion_exponent: zeta,
        directions: grid.len(),
        beta,
        beta_tilde,
    })
}

/// Sphere rates of a model whose drift and diffusion both declare a
/// homogeneous leading shape near the origin.
pub fn sphere_rates(model: &ScenarioModel, grid: &SphereGrid) -> Result<SphereRates> {
    let d = model.dimension;
    let probe = grid.iter().next().ok_or_else(|| Error::Shape("empty sphere grid".into()))?;
    let mut b = vec![0.0; d];
    let mut s = vec![0.0; d * d];
    let gamma = model
        .drift
        .homogeneous_shape(probe, 0, &mut b)
        .ok_or_else(|| Error::NotApplicable("drift has no homogeneous shape near 0".into()))?;
    let zeta = model
        .diffusion
        .homogeneous_shape(probe, 0, &mut s)
        .ok_or_else(|| Error::NotApplicable("diffusion has no homogeneous shape near 0".into()))?;
    sphere_rates_with(
        |t, i, out| {
            model.drift.homogeneous_shape(t, i, out);
        },
        |t, i, out| {
            model.diffusion.homogeneous_shape(t, i, out);
        },
        gamma,
        zeta,
        d,
        model.num_regimes(),
        grid,
    )
}

/// Stability from `Σμβ < 0`, instability from `Σμβ̃ > 0`.
pub fn verdict_nonlinear(mu: &ProbabilityVector, rates: &SphereRates) -> Result<Verdict> {
    let theorem = Criterion::Nonlinear;
    let wb = weighted_rate(mu, &rates.beta)?;
    let wt = weighted_rate(mu, &rates.beta_tilde)?;
    let kind = if wb < 0.0 {
        VerdictKind::AsymptoticallyStableInProbability
    } else if wt > 0.0 {
        VerdictKind::UnstableInProbability
    } else {
        VerdictKind::Inconclusive
    };
    let cert = NonlinearCertificate {
        rates: rates.clone(),
        mu: mu.as_slice().to_vec(),
        weighted_beta: wb,
        weighted_beta_tilde: wt,
    };
    let mut v = Verdict::new(kind, theorem, Some(Certificate::Nonlinear(cert)))
        .with_note(format!("Σμβ = {wb}, Σμβ̃ = {wt}"));
    if rates.directions > 2 {
        v.notes.push(format!("sphere sup/inf taken over {} directions", rates.directions));
    }
    Ok(v)
}

pub fn verdict_nonlinear_for_model(model: &ScenarioModel, grid: &SphereGrid) -> Result<Verdict> {
    let rates = sphere_rates(model, grid)?;
    let q = model.generator.constant_matrix()?;
    let mu = stationary_distribution(&q)?;
    verdict_nonlinear(&mu, &rates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(b: [f64; 2], sigma: [f64; 2], gamma: f64, zeta: f64) -> Result<SphereRates> {
        sphere_rates_with(
            |t, i, out| out[0] = b[i] * t[0],
            |_, i, out| out[0] = sigma[i],
            gamma,
            zeta,
            1,
            2,
            &SphereGrid::default_for(1),
        )
    }

    #[test]
    fn drift_dominated_rates_equal_coefficients() {
        let r = one_d([-2.0, 1.0], [1.0, 1.0], 2.0, 2.0).unwrap();
        assert_eq!(r.case, SphereCase::DriftDominated);
        // On {-1, 1}, b θ·θ = b for both points.
        assert_eq!(r.beta, vec![-2.0, 1.0]);
        assert_eq!(r.beta_tilde, vec![-2.0, 1.0]);
    }

    #[test]
    fn balanced_rates_subtract_half_variance() {
        let r = one_d([-2.0, 1.0], [1.0, 3.0], 3.0, 2.0).unwrap();
        assert_eq!(r.case, SphereCase::Balanced);
        assert_eq!(r.beta, vec![-2.5, -3.5]);
    }

    #[test]
    fn zero_shapes_give_zero_rates() {
        let r = one_d([0.0, 0.0], [0.0, 0.0], 2.0, 2.0).unwrap();
        assert_eq!(r.beta, vec![0.0, 0.0]);
        assert_eq!(r.beta_tilde, vec![0.0, 0.0]);
    }

    #[test]
    fn exponent_outside_range() {
        assert!(matches!(one_d([0.0; 2], [0.0; 2], 4.0, 2.0), Err(Error::NotApplicable(_))));
        assert!(matches!(one_d([0.0; 2], [0.0; 2], 1.0, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn verdict_arithmetic() {
        let mu = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        let stable = one_d([-2.0, 1.0], [1.0, 1.0], 2.0, 2.0).unwrap();
        assert_eq!(verdict_nonlinear(&mu, &stable).unwrap().verdict, VerdictKind::AsymptoticallyStableInProbability);
        let unstable = one_d([-1.0, 2.0], [1.0, 1.0], 2.0, 2.0).unwrap();
        assert_eq!(verdict_nonlinear(&mu, &unstable).unwrap().verdict, VerdictKind::UnstableInProbability);
        let edge = one_d([-1.0, 1.0], [1.0, 1.0], 2.0, 2.0).unwrap();
        assert_eq!(verdict_nonlinear(&mu, &edge).unwrap().verdict, VerdictKind::Inconclusive);
    }
}
