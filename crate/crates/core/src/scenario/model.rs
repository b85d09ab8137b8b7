use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::generator::SwitchingGenerator;
use crate::geometry::norm;
use crate::{Error, Result};

/// The regime index set. Countable spaces are always handled on a
/// truncation `{0, ..., n_trunc}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeSpace {
    Finite(usize),
    /// Index of the largest retained regime.
    CountableTruncated(usize),
}

impl RegimeSpace {
    pub const DEFAULT_TRUNCATION: usize = 200;

    pub fn finite(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("a finite regime space needs at least 2 regimes, got {n}")));
        }
        Ok(Self::Finite(n))
    }

    pub fn truncated(n_trunc: usize) -> Result<Self> {
        if n_trunc < 2 {
            return Err(Error::Domain(format!("truncation index must be at least 2, got {n_trunc}")));
        }
        Ok(Self::CountableTruncated(n_trunc))
    }

    /// Number of regimes actually represented.
    pub fn len(&self) -> usize {
        match *self {
            Self::Finite(n) => n,
            Self::CountableTruncated(n) => n + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self, Self::CountableTruncated(_))
    }
}

/// A per-regime vector or matrix field on `R^d`.
///
/// Drift fields write `d` entries into `out`; diffusion fields write the
/// `d × d` matrix `σ(x, i)` in row-major order.
pub trait Coefficients: Send + Sync + fmt::Debug {
    fn eval(&self, x: &[f64], regime: usize, out: &mut [f64]);

    /// Leading-order shape on the unit sphere when the field behaves like
    /// `|x|^κ · shape(x/|x|, i)` near 0: returns `κ` and fills `out` with the
    /// shape at `theta`. `None` when the field has no such structure.
    fn homogeneous_shape(&self, _theta: &[f64], _regime: usize, _out: &mut [f64]) -> Option<f64> {
        None
    }
}

fn coef(values: &[f64], regime: usize) -> f64 {
    values[regime]
}

/// `b(x, i) = coef_i · x`.
#[derive(Debug, Clone)]
pub struct LinearDrift {
    pub coef: Vec<f64>,
}

impl Coefficients for LinearDrift {
    fn eval(&self, x: &[f64], regime: usize, out: &mut [f64]) {
        let c = coef(&self.coef, regime);
        for (o, v) in out.iter_mut().zip(x) {
            *o = c * v;
        }
    }

    fn homogeneous_shape(&self, theta: &[f64], regime: usize, out: &mut [f64]) -> Option<f64> {
        self.eval(theta, regime, out);
        Some(1.0)
    }
}

/// `b(x, i) = coef_i · (|x|^κ ∧ |x|) · x/|x|`, which is `coef_i |x|^{κ-1} x`
/// near the origin and linear beyond `|x| = 1`.
#[derive(Debug, Clone)]
pub struct PowerClippedDrift {
    pub coef: Vec<f64>,
    pub exponent: f64,
}

impl Coefficients for PowerClippedDrift {
    fn eval(&self, x: &[f64], regime: usize, out: &mut [f64]) {
        let r = norm(x);
        if r == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let scale = coef(&self.coef, regime) * r.powf(self.exponent).min(r) / r;
        for (o, v) in out.iter_mut().zip(x) {
            *o = scale * v;
        }
    }

    fn homogeneous_shape(&self, theta: &[f64], regime: usize, out: &mut [f64]) -> Option<f64> {
        let c = coef(&self.coef, regime);
        for (o, t) in out.iter_mut().zip(theta) {
            *o = c * t;
        }
        Some(self.exponent)
    }
}

fn write_scaled_identity(out: &mut [f64], d: usize, s: f64) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for k in 0..d {
        out[k * d + k] = s;
    }
}

/// `σ(x, i) = coef_i · I`.
#[derive(Debug, Clone)]
pub struct ConstantDiffusion {
    pub coef: Vec<f64>,
    pub dimension: usize,
}

impl Coefficients for ConstantDiffusion {
    fn eval(&self, _x: &[f64], regime: usize, out: &mut [f64]) {
        write_scaled_identity(out, self.dimension, coef(&self.coef, regime));
    }
}

/// `σ(x, i) = coef_i · diag(x)`.
#[derive(Debug, Clone)]
pub struct LinearDiffusion {
    pub coef: Vec<f64>,
    pub dimension: usize,
}

impl Coefficients for LinearDiffusion {
    fn eval(&self, x: &[f64], regime: usize, out: &mut [f64]) {
        let c = coef(&self.coef, regime);
        let d = self.dimension;
        out.iter_mut().for_each(|o| *o = 0.0);
        for k in 0..d {
            out[k * d + k] = c * x[k];
        }
    }

    fn homogeneous_shape(&self, theta: &[f64], regime: usize, out: &mut [f64]) -> Option<f64> {
        self.eval(theta, regime, out);
        Some(1.0)
    }
}

/// `σ(x, i) = coef_i · (|x|^κ ∧ |x|) · I`.
#[derive(Debug, Clone)]
pub struct PowerClippedDiffusion {
    pub coef: Vec<f64>,
    pub exponent: f64,
    pub dimension: usize,
}

impl Coefficients for PowerClippedDiffusion {
    fn eval(&self, x: &[f64], regime: usize, out: &mut [f64]) {
        let r = norm(x);
        let s = coef(&self.coef, regime) * r.powf(self.exponent).min(r);
        write_scaled_identity(out, self.dimension, s);
    }

    fn homogeneous_shape(&self, _theta: &[f64], regime: usize, out: &mut [f64]) -> Option<f64> {
        write_scaled_identity(out, self.dimension, coef(&self.coef, regime));
        Some(self.exponent)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl Coefficients for ZeroField {
    fn eval(&self, _x: &[f64], _regime: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
}

/// Closure-backed drift for programmatic models.
pub struct FnDrift<F>(pub F);

impl<F> fmt::Debug for FnDrift<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnDrift")
    }
}

impl<F> Coefficients for FnDrift<F>
where
    F: Fn(&[f64], usize, &mut [f64]) + Send + Sync,
{
    fn eval(&self, x: &[f64], regime: usize, out: &mut [f64]) {
        (self.0)(x, regime, out)
    }
}

/// Closure-backed diffusion for programmatic models (row-major `d × d`).
pub struct FnDiffusion<F>(pub F);

impl<F> fmt::Debug for FnDiffusion<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnDiffusion")
    }
}

impl<F> Coefficients for FnDiffusion<F>
where
    F: Fn(&[f64], usize, &mut [f64]) + Send + Sync,
{
    fn eval(&self, x: &[f64], regime: usize, out: &mut [f64]) {
        (self.0)(x, regime, out)
    }
}

/// Full description of `(X_t, Λ_t)`.
#[derive(Debug, Clone)]
pub struct ScenarioModel {
    pub dimension: usize,
    pub regimes: RegimeSpace,
    pub drift: Arc<dyn Coefficients>,
    pub diffusion: Arc<dyn Coefficients>,
    pub generator: SwitchingGenerator,
}

impl ScenarioModel {
    pub fn new(
        dimension: usize,
        regimes: RegimeSpace,
        drift: Arc<dyn Coefficients>,
        diffusion: Arc<dyn Coefficients>,
        generator: SwitchingGenerator,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        if generator.num_regimes() != regimes.len() {
            return Err(Error::Shape(format!(
                "generator has {} regimes but the regime space has {}",
                generator.num_regimes(),
                regimes.len()
            )));
        }
        Ok(Self {
            dimension,
            regimes,
            drift,
            diffusion,
            generator,
        })
    }

    pub fn num_regimes(&self) -> usize {
        self.regimes.len()
    }

    pub fn drift_at(&self, x: &[f64], regime: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.drift.eval(x, regime, &mut out);
        out
    }

    pub fn sigma_at(&self, x: &[f64], regime: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension * self.dimension];
        self.diffusion.eval(x, regime, &mut out);
        out
    }

    /// `a(x, i) = σσ*`, row-major.
    pub fn diffusion_matrix(&self, x: &[f64], regime: usize) -> Vec<f64> {
        sigma_sigma_t(&self.sigma_at(x, regime), self.dimension)
    }

    /// Regimes where `b(0, i) ≠ 0` or `σ(0, i) ≠ 0`; the origin must be an
    /// equilibrium for the stability questions to make sense.
    pub fn equilibrium_violations(&self) -> Vec<usize> {
        let zero = vec![0.0; self.dimension];
        (0..self.num_regimes())
            .filter(|&i| {
                self.drift_at(&zero, i).iter().any(|v| *v != 0.0)
                    || self.sigma_at(&zero, i).iter().any(|v| *v != 0.0)
            })
            .collect()
    }

    /// Checks the drift and diffusion evaluate to finite values at every
    /// sample point and regime.
    pub fn check_coefficients(&self, points: &[Vec<f64>]) -> Result<()> {
        for x in points {
            if x.len() != self.dimension {
                return Err(Error::Shape(format!("sample point {x:?} has wrong dimension")));
            }
            for i in 0..self.num_regimes() {
                let b = self.drift_at(x, i);
                let s = self.sigma_at(x, i);
                if b.iter().chain(&s).any(|v| !v.is_finite()) {
                    return Err(Error::Evaluator {
                        x: x.clone(),
                        i,
                        j: None,
                        reason: "non-finite drift or diffusion".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn sigma_sigma_t(sigma: &[f64], d: usize) -> Vec<f64> {
    let mut a = vec![0.0; d * d];
    for k in 0..d {
        for l in 0..d {
            a[k * d + l] = (0..d).map(|m| sigma[k * d + m] * sigma[l * d + m]).sum();
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_space_sizes() {
        assert_eq!(RegimeSpace::finite(3).unwrap().len(), 3);
        assert_eq!(RegimeSpace::truncated(200).unwrap().len(), 201);
        assert!(RegimeSpace::finite(1).is_err());
    }

    #[test]
    fn power_clipped_drift_switches_to_linear() {
        let b = PowerClippedDrift { coef: vec![2.0], exponent: 2.0 };
        let mut out = [0.0];
        b.eval(&[0.1], 0, &mut out);
        assert!((out[0] - 2.0 * 0.01).abs() < 1e-15);
        b.eval(&[-0.1], 0, &mut out);
        assert!((out[0] + 2.0 * 0.01).abs() < 1e-15);
        b.eval(&[3.0], 0, &mut out);
        assert!((out[0] - 6.0).abs() < 1e-15);
        b.eval(&[0.0], 0, &mut out);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn diffusion_matrix_is_psd_symmetric() {
        let sigma = [1.0, 2.0, -0.5, 0.3];
        let a = sigma_sigma_t(&sigma, 2);
        assert_eq!(a[1], a[2]);
        assert!(a[0] >= 0.0 && a[3] >= 0.0 && a[0] * a[3] - a[1] * a[2] >= -1e-12);
    }
}
