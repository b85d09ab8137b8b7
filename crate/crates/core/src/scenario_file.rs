//! JSON scenario files and their translation into a [`ScenarioModel`].
//!
//! ```json
//! {
//!   "name": "two-regime power law",
//!   "dimension": 1,
//!   "regimes": {"finite": 2},
//!   "drift": {"power_clipped": {"coef": [-2, 1], "exponent": 2}},
//!   "diffusion": {"power_clipped": {"coef": [1, 1], "exponent": 2}},
//!   "generator": {"dense": [[-1, 1], [1, -1]]},
//!   "test_function": {"power": 1},
//!   "rates": {"a1": {"rates": [-2, 1], "companion": {"power": 2}}}
//! }
//! ```
//!
//! Per-regime values are either a list with one entry per regime, a scalar,
//! or a pattern `{"head": [v0, v1, ...], "poly": [c0, c1, ...]}` giving
//! `head[i]` for the listed regimes and `Σ_k c_k i^k` after them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::certificates::{MMatrixMode, DEFAULT_RATE_CAP};
use crate::scenario::{
    default_sample_points, validate_generator, Annulus, Coefficients, Companion, ConstantDiffusion, LinearDiffusion, LinearDrift, PowerClippedDiffusion,
    PowerClippedDrift, RateMode, RateVector, RegimeSpace, ScenarioModel, SwitchingGenerator, TestFunctionSpec,
    ZeroField,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerRegime {
    Scalar(f64),
    List(Vec<f64>),
    Pattern {
        #[serde(default)]
        head: Vec<f64>,
        poly: Vec<f64>,
    },
}

impl PerRegime {
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>> {
        let values = match self {
            Self::Scalar(v) => vec![*v; n],
            Self::List(v) => {
                if v.len() != n {
                    return Err(Error::Validation(format!("expected {n} per-regime values, got {}", v.len())));
                }
                v.clone()
            }
            Self::Pattern { head, poly } => (0..n)
                .map(|i| {
                    head.get(i).copied().unwrap_or_else(|| {
                        let x = i as f64;
                        poly.iter().rev().fold(0.0, |acc, c| acc * x + c)
                    })
                })
                .collect(),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("per-regime values must be finite".into()));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    /// `coef_i · x`.
    Linear { coef: PerRegime },
    /// `coef_i (|x|^exponent ∧ |x|) x/|x|`.
    PowerClipped { coef: PerRegime, exponent: f64 },
    Zero,
    /// Programmatic coefficients only; rejected in files.
    Custom(serde_json::Value),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    /// `coef_i · I`.
    Constant { coef: PerRegime },
    /// `coef_i · diag(x)`.
    Linear { coef: PerRegime },
    /// `coef_i (|x|^exponent ∧ |x|) · I`.
    PowerClipped { coef: PerRegime, exponent: f64 },
    Zero,
    Custom(serde_json::Value),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BirthDeathLaw {
    /// Birth `b(i+1)`, death `a(i+1)`.
    Linear,
    /// Birth `b`, death `a`.
    Constant,
    /// Explicit `birth` and `death` arrays.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthDeathSpec {
    pub law: BirthDeathLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birth: Option<PerRegime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub death: Option<PerRegime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Dense(Vec<Vec<f64>>),
    BirthDeath(BirthDeathSpec),
    /// Birth-death rates perturbed by `sin x₁`: `q_{i,i+1} = c_i + i sin x₁`,
    /// `q_{i,i-1} = a_i + (i-1) sin x₁`.
    #[serde(rename = "example_2_1")]
    SinePerturbed { a: PerRegime, c: PerRegime },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionFile {
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompanionRates {
    pub rates: PerRegime,
    pub companion: Companion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annulus: Option<Annulus>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<CompanionRates>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<PerRegime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a3: Option<PerRegime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a4: Option<PerRegime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Stability,
    Recurrence,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    /// Upper class boundaries; `null` entries are read as `-∞`.
    pub thresholds: Vec<Option<f64>>,
    #[serde(default = "default_partition_mode")]
    pub mode: MMatrixMode,
    #[serde(default = "default_rate_cap")]
    pub rate_cap: f64,
    /// Declared supremum of the rates beyond the truncation; raises the
    /// top class rate when larger than anything retained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_sup: Option<f64>,
}

fn default_partition_mode() -> MMatrixMode {
    MMatrixMode::Semipositivity
}

fn default_rate_cap() -> f64 {
    DEFAULT_RATE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x0: Vec<f64>,
    #[serde(default)]
    pub regime: usize,
}

/// The on-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: usize,
    pub regimes: RegimeSpace,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub generator: GeneratorSpec,
    pub test_function: TestFunctionFile,
    #[serde(default)]
    pub rates: RatesSpec,
    #[serde(default)]
    pub property: Property,
    /// Positive test function on the regimes for the spectral lower bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_test_function: Option<PerRegime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
}

/// A validated scenario ready for analysis.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub file: ScenarioFile,
    pub model: ScenarioModel,
    pub rho: TestFunctionSpec,
    pub declared: DeclaredRates,
    pub eigen_test_function: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct DeclaredRates {
    pub a1: Option<RateVector>,
    pub a2: Option<RateVector>,
    pub a3: Option<RateVector>,
    pub a4: Option<RateVector>,
}

impl DeclaredRates {
    pub fn get(&self, mode: RateMode) -> Option<&RateVector> {
        match mode {
            RateMode::CompanionNearZero => self.a1.as_ref(),
            RateMode::RelativeNearZero => self.a2.as_ref(),
            RateMode::SpectralNearZero => self.a3.as_ref(),
            RateMode::SpectralAtInfinity => self.a4.as_ref(),
        }
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Replaces the truncation level of a countable regime space.
    pub fn with_truncation(mut self, n_trunc: usize) -> Self {
        if let RegimeSpace::CountableTruncated(_) = self.regimes {
            self.regimes = RegimeSpace::CountableTruncated(n_trunc);
        }
        self
    }

    pub fn build(&self) -> Result<Scenario> {
        let d = self.dimension;
        if d == 0 {
            return Err(Error::Validation("dimension must be positive".into()));
        }
        let regimes = match self.regimes {
            RegimeSpace::Finite(n) => RegimeSpace::finite(n)?,
            RegimeSpace::CountableTruncated(n) => RegimeSpace::truncated(n)?,
        };
        let n = regimes.len();
        let drift: Arc<dyn Coefficients> = match &self.drift {
            DriftSpec::Linear { coef } => Arc::new(LinearDrift { coef: coef.resolve(n)? }),
            DriftSpec::PowerClipped { coef, exponent } => {
                Arc::new(PowerClippedDrift { coef: coef.resolve(n)?, exponent: positive_exponent(*exponent)? })
            }
            DriftSpec::Zero => Arc::new(ZeroField),
            DriftSpec::Custom(_) => {
                return Err(Error::Validation("custom drift is only available programmatically".into()));
            }
        };
        let diffusion: Arc<dyn Coefficients> = match &self.diffusion {
            DiffusionSpec::Constant { coef } => Arc::new(ConstantDiffusion { coef: coef.resolve(n)?, dimension: d }),
            DiffusionSpec::Linear { coef } => Arc::new(LinearDiffusion { coef: coef.resolve(n)?, dimension: d }),
            DiffusionSpec::PowerClipped { coef, exponent } => Arc::new(PowerClippedDiffusion {
                coef: coef.resolve(n)?,
                exponent: positive_exponent(*exponent)?,
                dimension: d,
            }),
            DiffusionSpec::Zero => Arc::new(ZeroField),
            DiffusionSpec::Custom(_) => {
                return Err(Error::Validation("custom diffusion is only available programmatically".into()));
            }
        };
        let generator = build_generator(&self.generator, n)?;
        let model = ScenarioModel::new(d, regimes, drift, diffusion, generator)?;
        let points = default_sample_points(d);
        model.check_coefficients(&points).map_err(|e| Error::Validation(e.to_string()))?;
        let report = validate_generator(&model.generator, &points)?;
        if let Some(failure) = report.first_failure() {
            return Err(Error::Validation(failure));
        }
        let rho = TestFunctionSpec::power(self.test_function.power)?;
        let declared = self.declared_rates(n)?;
        let eigen_test_function = self.eigen_test_function.as_ref().map(|g| g.resolve(n)).transpose()?;
        if let Some(init) = &self.initial {
            if init.x0.len() != d || init.regime >= n {
                return Err(Error::Validation("initial state does not match the model".into()));
            }
        }
        Ok(Scenario {
            name: self.name.clone().unwrap_or_else(|| "scenario".into()),
            file: self.clone(),
            model,
            rho,
            declared,
            eigen_test_function,
        })
    }

    fn declared_rates(&self, n: usize) -> Result<DeclaredRates> {
        let r = &self.rates;
        Ok(DeclaredRates {
            a1: r
                .a1
                .as_ref()
                .map(|c| RateVector::declared(RateMode::CompanionNearZero, c.rates.resolve(n)?, Some(c.companion), c.annulus))
                .transpose()?,
            a2: r.a2.as_ref().map(|v| RateVector::declared(RateMode::RelativeNearZero, v.resolve(n)?, None, None)).transpose()?,
            a3: r.a3.as_ref().map(|v| RateVector::declared(RateMode::SpectralNearZero, v.resolve(n)?, None, None)).transpose()?,
            a4: r.a4.as_ref().map(|v| RateVector::declared(RateMode::SpectralAtInfinity, v.resolve(n)?, None, None)).transpose()?,
        })
    }
}

fn positive_exponent(e: f64) -> Result<f64> {
    if e > 0.0 && e.is_finite() {
        Ok(e)
    } else {
        Err(Error::Validation(format!("exponent must be positive, got {e}")))
    }
}

fn build_generator(spec: &GeneratorSpec, n: usize) -> Result<SwitchingGenerator> {
    match spec {
        GeneratorSpec::Dense(rows) => {
            if rows.len() != n {
                return Err(Error::Validation(format!("dense generator has {} rows for {n} regimes", rows.len())));
            }
            SwitchingGenerator::from_rows(rows).map_err(|e| Error::Validation(e.to_string()))
        }
        GeneratorSpec::BirthDeath(bd) => {
            let (birth, death) = match bd.law {
                BirthDeathLaw::Linear | BirthDeathLaw::Constant => {
                    let (a, b) = match (bd.a, bd.b) {
                        (Some(a), Some(b)) => (a, b),
                        _ => return Err(Error::Validation("birth_death law needs both `a` and `b`".into())),
                    };
                    if bd.law == BirthDeathLaw::Linear {
                        ((0..n).map(|i| b * (i + 1) as f64).collect(), (0..n).map(|i| a * (i + 1) as f64).collect())
                    } else {
                        (vec![b; n], vec![a; n])
                    }
                }
                BirthDeathLaw::Custom => match (&bd.birth, &bd.death) {
                    (Some(b), Some(d)) => (b.resolve(n)?, d.resolve(n)?),
                    _ => return Err(Error::Validation("custom birth_death needs `birth` and `death`".into())),
                },
            };
            if birth.iter().chain(&death).any(|r| *r < 0.0) {
                return Err(Error::Validation("birth and death rates must be nonnegative".into()));
            }
            SwitchingGenerator::birth_death(birth, death)
        }
        GeneratorSpec::SinePerturbed { a, c } => SwitchingGenerator::sine_perturbed_birth_death(c.resolve(n)?, a.resolve(n)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COR: &str = r#"{
        "dimension": 1,
        "regimes": {"finite": 2},
        "drift": {"power_clipped": {"coef": [-2, 1], "exponent": 2}},
        "diffusion": {"power_clipped": {"coef": [1, 1], "exponent": 2}},
        "generator": {"dense": [[-1, 1], [1, -1]]},
        "test_function": {"power": 1},
        "rates": {"a1": {"rates": [-2, 1], "companion": {"power": 2}}}
    }"#;

    #[test]
    fn parses_and_builds() {
        let f = ScenarioFile::from_json(COR).unwrap();
        let s = f.build().unwrap();
        assert_eq!(s.model.num_regimes(), 2);
        assert_eq!(s.declared.a1.as_ref().unwrap().rates, vec![-2.0, 1.0]);
        let again = ScenarioFile::from_json(&f.to_json_pretty()).unwrap();
        assert_eq!(again, f);
    }

    #[test]
    fn per_regime_patterns() {
        let p: PerRegime = serde_json::from_str(r#"{"head": [-2], "poly": [0, 1]}"#).unwrap();
        assert_eq!(p.resolve(4).unwrap(), vec![-2.0, 1.0, 2.0, 3.0]);
        let p: PerRegime = serde_json::from_str(r#"{"poly": [2, 2, 1]}"#).unwrap();
        assert_eq!(p.resolve(3).unwrap(), vec![2.0, 5.0, 10.0]);
        assert_eq!(PerRegime::Scalar(0.5).resolve(2).unwrap(), vec![0.5, 0.5]);
        assert!(PerRegime::List(vec![1.0]).resolve(2).is_err());
    }

    #[test]
    fn malformed_is_parse_error() {
        assert!(matches!(ScenarioFile::from_json("{ not json"), Err(Error::Parse(_))));
        assert!(matches!(ScenarioFile::from_json(r#"{"dimension": 1}"#), Err(Error::Parse(_))));
    }

    #[test]
    fn custom_fields_rejected() {
        let text = COR.replace(r#"{"power_clipped": {"coef": [-2, 1], "exponent": 2}}"#, r#"{"custom": "f(x)"}"#);
        let f = ScenarioFile::from_json(&text).unwrap();
        assert!(matches!(f.build(), Err(Error::Validation(_))));
    }

    #[test]
    fn truncated_birth_death() {
        let text = r#"{
            "dimension": 1,
            "regimes": {"countable_truncated": 10},
            "drift": {"linear": {"coef": {"head": [-2], "poly": [1]}}},
            "diffusion": {"constant": {"coef": 1}},
            "generator": {"birth_death": {"law": "linear", "a": 3, "b": 1}},
            "test_function": {"power": 1}
        }"#;
        let s = ScenarioFile::from_json(text).unwrap().build().unwrap();
        assert_eq!(s.model.num_regimes(), 11);
        assert_eq!(s.model.generator.rate(&[0.0], 3, 4), 4.0);
        assert_eq!(s.model.generator.rate(&[0.0], 3, 2), 12.0);
    }
}
