use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::model::ScenarioModel;
use crate::geometry::norm;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroBehavior {
    VanishesOnlyAtZero,
    BlowsUpAtZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfinityBehavior {
    BlowsUpAtInfinity,
    VanishesAtInfinity,
    Unspecified,
}

/// A closed-form test function with user-supplied derivatives.
pub trait CustomTestFunction: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Row-major `d × d` Hessian.
    fn hessian(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Clone)]
pub enum TestFamily {
    /// `ρ(x) = |x|^p`.
    PowerNorm(f64),
    Custom(Arc<dyn CustomTestFunction>),
}

impl fmt::Debug for TestFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerNorm(p) => write!(f, "PowerNorm({p})"),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Lyapunov test function `ρ` together with its declared behavior at the
/// origin and at infinity.
#[derive(Debug, Clone)]
pub struct TestFunctionSpec {
    pub family: TestFamily,
    pub at_zero: ZeroBehavior,
    pub at_infinity: InfinityBehavior,
}

impl TestFunctionSpec {
    /// `|x|^p`; the behavior at 0 and ∞ follows from the sign of `p`.
    pub fn power(p: f64) -> Result<Self> {
        if !p.is_finite() || p == 0.0 {
            return Err(Error::Domain(format!("power test function needs finite p != 0, got {p}")));
        }
        let (at_zero, at_infinity) = if p > 0.0 {
            (ZeroBehavior::VanishesOnlyAtZero, InfinityBehavior::BlowsUpAtInfinity)
        } else {
            (ZeroBehavior::BlowsUpAtZero, InfinityBehavior::VanishesAtInfinity)
        };
        Ok(Self {
            family: TestFamily::PowerNorm(p),
            at_zero,
            at_infinity,
        })
    }

    pub fn custom(f: Arc<dyn CustomTestFunction>, at_zero: ZeroBehavior, at_infinity: InfinityBehavior) -> Self {
        Self {
            family: TestFamily::Custom(f),
            at_zero,
            at_infinity,
        }
    }

    pub fn power_exponent(&self) -> Option<f64> {
        match self.family {
            TestFamily::PowerNorm(p) => Some(p),
            TestFamily::Custom(_) => None,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.family {
            TestFamily::PowerNorm(p) => norm(x).powf(*p),
            TestFamily::Custom(f) => f.value(x),
        }
    }

    pub fn label(&self) -> String {
        match &self.family {
            TestFamily::PowerNorm(p) => format!("|x|^{p}"),
            TestFamily::Custom(_) => "custom".into(),
        }
    }
}

/// `L^{(i)}ρ(x) = ½ Σ a_kl(x,i) ∂_k∂_l ρ(x) + Σ b_k(x,i) ∂_k ρ(x)`.
///
/// For `|x|^p` this uses the closed form
/// `p|x|^{p-2} [ b·x + ½ tr a + ((p-2)/2) xᵀa x / |x|² ]`.
pub fn apply_generator_l(model: &ScenarioModel, rho: &TestFunctionSpec, x: &[f64], regime: usize) -> Result<f64> {
    let d = model.dimension;
    if x.len() != d {
        return Err(Error::Shape(format!("point has dimension {}, model has {d}", x.len())));
    }
    let b = model.drift_at(x, regime);
    let a = model.diffusion_matrix(x, regime);
    match &rho.family {
        TestFamily::PowerNorm(p) => {
            let p = *p;
            let r2: f64 = x.iter().map(|v| v * v).sum();
            if r2 == 0.0 {
                if p < 2.0 {
                    return Err(Error::Domain(format!("|x|^{p} is not twice differentiable at 0")));
                }
                let trace: f64 = (0..d).map(|k| a[k * d + k]).sum();
                return Ok(if p == 2.0 { trace } else { 0.0 });
            }
            let bx: f64 = b.iter().zip(x).map(|(u, v)| u * v).sum();
            let trace: f64 = (0..d).map(|k| a[k * d + k]).sum();
            let mut xax = 0.0;
            for k in 0..d {
                for l in 0..d {
                    xax += x[k] * a[k * d + l] * x[l];
                }
            }
            let bracket = bx + 0.5 * trace + 0.5 * (p - 2.0) * xax / r2;
            Ok(p * r2.powf(0.5 * (p - 2.0)) * bracket)
        }
        TestFamily::Custom(f) => {
            let mut grad = vec![0.0; d];
            let mut hess = vec![0.0; d * d];
            f.gradient(x, &mut grad);
            f.hessian(x, &mut hess);
            let second: f64 = a.iter().zip(&hess).map(|(u, v)| u * v).sum();
            let first: f64 = b.iter().zip(&grad).map(|(u, v)| u * v).sum();
            let value = 0.5 * second + first;
            if !value.is_finite() {
                return Err(Error::Evaluator {
                    x: x.to_vec(),
                    i: regime,
                    j: None,
                    reason: "generator applied to the test function is not finite".into(),
                });
            }
            Ok(value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ConstantDiffusion, LinearDrift, SwitchingGenerator, ZeroField};
    use crate::scenario::RegimeSpace;

    fn model(drift: Arc<dyn crate::scenario::Coefficients>, diffusion: Arc<dyn crate::scenario::Coefficients>, d: usize) -> ScenarioModel {
        let gen = SwitchingGenerator::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        ScenarioModel::new(d, RegimeSpace::Finite(2), drift, diffusion, gen).unwrap()
    }

    #[test]
    fn power_sign_fixes_behavior() {
        assert_eq!(TestFunctionSpec::power(0.5).unwrap().at_zero, ZeroBehavior::VanishesOnlyAtZero);
        assert_eq!(TestFunctionSpec::power(-1.0).unwrap().at_zero, ZeroBehavior::BlowsUpAtZero);
        assert!(TestFunctionSpec::power(0.0).is_err());
    }

    #[test]
    fn linear_drift_unit_noise_abs_value() {
        let m = model(
            Arc::new(LinearDrift { coef: vec![-2.0, 0.5] }),
            Arc::new(ConstantDiffusion { coef: vec![1.0, 1.0], dimension: 1 }),
            1,
        );
        let rho = TestFunctionSpec::power(1.0).unwrap();
        for &x in &[1.0, 3.5, -7.0] {
            assert!((apply_generator_l(&m, &rho, &[x], 0).unwrap() + 2.0 * f64::abs(x)).abs() < 1e-12);
            assert!((apply_generator_l(&m, &rho, &[x], 1).unwrap() - 0.5 * f64::abs(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_operator_gives_zero() {
        let m = model(Arc::new(ZeroField), Arc::new(ZeroField), 2);
        let rho = TestFunctionSpec::power(-1.5).unwrap();
        assert_eq!(apply_generator_l(&m, &rho, &[0.3, -0.4], 1).unwrap(), 0.0);
    }

    #[test]
    fn laplacian_of_squared_norm() {
        let m = model(Arc::new(ZeroField), Arc::new(ConstantDiffusion { coef: vec![1.0, 1.0], dimension: 2 }), 2);
        let rho = TestFunctionSpec::power(2.0).unwrap();
        assert!((apply_generator_l(&m, &rho, &[0.3, -1.4], 0).unwrap() - 2.0).abs() < 1e-14);
        assert!((apply_generator_l(&m, &rho, &[0.0, 0.0], 0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_power_at_origin_is_domain_error() {
        let m = model(Arc::new(ZeroField), Arc::new(ZeroField), 1);
        let rho = TestFunctionSpec::power(1.0).unwrap();
        assert!(matches!(apply_generator_l(&m, &rho, &[0.0], 0), Err(Error::Domain(_))));
    }
}
