//! Built-in example scenarios with their stated parameter conditions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, AnalysisOptions, AnalysisReport, ReferenceCheck};
use crate::certificates::{MMatrixMode, DEFAULT_RATE_CAP};
use crate::scenario::{Companion, RegimeSpace};
use crate::scenario_file::{
    BirthDeathLaw, BirthDeathSpec, CompanionRates, DiffusionSpec, DriftSpec, GeneratorSpec, InitialState,
    PartitionSpec, PerRegime, Property, RatesSpec, ScenarioFile, TestFunctionFile,
};
use crate::verdict::Criterion;
use crate::{Error, Result};

pub const DEFAULT_TRUNCATION: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresetId {
    #[serde(rename = "ex2.1")]
    SineBirthDeath,
    #[serde(rename = "ex3.1")]
    SwitchedQuadraticNoise,
    #[serde(rename = "ex4.1")]
    SwitchedOrnsteinUhlenbeck,
    #[serde(rename = "ex4.2")]
    UnboundedDrift,
    #[serde(rename = "cor1")]
    PowerLaw,
}

impl PresetId {
    pub const ALL: [PresetId; 5] = [
        Self::SineBirthDeath,
        Self::SwitchedQuadraticNoise,
        Self::SwitchedOrnsteinUhlenbeck,
        Self::UnboundedDrift,
        Self::PowerLaw,
    ];

    pub fn wire_name(self) -> &'static str {
        match self {
            Self::SineBirthDeath => "ex2.1",
            Self::SwitchedQuadraticNoise => "ex3.1",
            Self::SwitchedOrnsteinUhlenbeck => "ex4.1",
            Self::UnboundedDrift => "ex4.2",
            Self::PowerLaw => "cor1",
        }
    }

    /// Parameter names and defaults.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Self::SineBirthDeath => &[("a2", 3.0), ("c1", 1.0), ("kappa", 1.4)],
            Self::SwitchedQuadraticNoise | Self::SwitchedOrnsteinUhlenbeck => {
                &[("a", 3.0), ("b", 1.0), ("gamma", 1.0), ("c", 2.0)]
            }
            Self::UnboundedDrift => &[("mu0", -2.0)],
            Self::PowerLaw => &[("b1", -2.0), ("b2", 1.0), ("sigma1", 1.0), ("sigma2", 1.0), ("q", 1.0)],
        }
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

impl FromStr for PresetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.wire_name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown example `{s}`; expected one of ex2.1, ex3.1, ex4.1, ex4.2, cor1")))
    }
}

/// Monte Carlo settings that go with a preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationDefaults {
    pub x0: f64,
    pub regime: usize,
    pub eps: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub id: PresetId,
    pub parameters: BTreeMap<String, f64>,
    pub file: ScenarioFile,
    pub reference: ReferenceCheck,
    /// Extra remarks attached to the designated verdict.
    pub notes: Vec<String>,
    pub simulation: Option<SimulationDefaults>,
}

impl Preset {
    /// Builds the preset with `overrides` applied on top of its defaults.
    pub fn build(id: PresetId, overrides: &BTreeMap<String, f64>, truncation: Option<usize>) -> Result<Self> {
        let mut p: BTreeMap<String, f64> = id.defaults().iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in overrides {
            if !p.contains_key(k) {
                let known: Vec<&str> = id.defaults().iter().map(|(k, _)| *k).collect();
                return Err(Error::Parse(format!("{id} has no parameter `{k}`; known: {}", known.join(", "))));
            }
            if !v.is_finite() {
                return Err(Error::Validation(format!("parameter `{k}` must be finite")));
            }
            p.insert(k.clone(), *v);
        }
        let n_trunc = truncation.unwrap_or(DEFAULT_TRUNCATION);
        let (file, reference, notes, simulation) = match id {
            PresetId::SineBirthDeath => sine_birth_death(&p, n_trunc)?,
            PresetId::SwitchedQuadraticNoise => switched_linear(&p, n_trunc, false)?,
            PresetId::SwitchedOrnsteinUhlenbeck => switched_linear(&p, n_trunc, true)?,
            PresetId::UnboundedDrift => unbounded_drift(&p, n_trunc)?,
            PresetId::PowerLaw => power_law(&p)?,
        };
        Ok(Self { id, parameters: p, file, reference, notes, simulation })
    }

    /// Analyzes the preset and attaches its reference condition and notes.
    pub fn reproduce(&self, opts: &AnalysisOptions) -> Result<AnalysisReport> {
        let scenario = self.file.build()?;
        let mut report = analyze(&scenario, opts)?;
        if let Some(v) = report.verdicts.iter_mut().find(|v| v.theorem == self.reference.designated) {
            v.notes.extend(self.notes.iter().cloned());
        }
        report.reference = Some(self.reference.clone());
        Ok(report)
    }
}

fn get(p: &BTreeMap<String, f64>, k: &str) -> f64 {
    p[k]
}

fn positive(p: &BTreeMap<String, f64>, keys: &[&str]) -> Result<()> {
    for k in keys {
        if !(get(p, k) > 0.0) {
            return Err(Error::Validation(format!("parameter `{k}` must be positive")));
        }
    }
    Ok(())
}

type Built = (ScenarioFile, ReferenceCheck, Vec<String>, Option<SimulationDefaults>);

/// `dX = b_i X dt + (X² ∧ |X|) dB` with state-dependent birth-death switching
/// `q_{k,k+1} = c_k + k sin x`, `q_{k,k-1} = a_k + (k-1) sin x`.
fn sine_birth_death(p: &BTreeMap<String, f64>, n_trunc: usize) -> Result<Built> {
    positive(p, &["a2", "c1", "kappa"])?;
    let (a2, c1, kappa) = (get(p, "a2"), get(p, "c1"), get(p, "kappa"));
    let n = n_trunc + 1;
    // b_0 = -1 and b_k = κ - 1/(k+1) increasing to κ.
    let b: Vec<f64> = (0..n).map(|k| if k == 0 { -1.0 } else { kappa - 1.0 / (k + 1) as f64 }).collect();
    let file = ScenarioFile {
        name: Some("sine-perturbed birth-death switching".into()),
        dimension: 1,
        regimes: RegimeSpace::CountableTruncated(n_trunc),
        drift: DriftSpec::Linear { coef: PerRegime::List(b.clone()) },
        diffusion: DiffusionSpec::PowerClipped { coef: PerRegime::Scalar(1.0), exponent: 2.0 },
        generator: GeneratorSpec::SinePerturbed {
            // a_k = k + 2 for k ≥ 2 keeps a_k - (k-1) ≥ 3.
            a: PerRegime::Pattern { head: vec![0.0, a2], poly: vec![2.0, 1.0] },
            // c_k = k + 1 for k ≥ 1 keeps c_k - k ≥ 1.
            c: PerRegime::Pattern { head: vec![c1], poly: vec![1.0, 1.0] },
        },
        test_function: TestFunctionFile { power: 1.0 },
        rates: RatesSpec { a2: Some(PerRegime::List(b)), ..Default::default() },
        property: Property::Stability,
        eigen_test_function: None,
        partition: Some(PartitionSpec {
            thresholds: vec![Some(0.0), Some(kappa)],
            mode: MMatrixMode::LeadingMinorsOnly,
            rate_cap: DEFAULT_RATE_CAP,
            tail_sup: Some(kappa),
        }),
        initial: None,
    };
    let threshold = a2 / (1.0 + c1);
    let reference = ReferenceCheck {
        condition: format!("κ < a₂/(1+c₁) = {threshold}"),
        holds: kappa < threshold,
        designated: Criterion::Partition,
    };
    Ok((file, reference, Vec::new(), None))
}

/// `dX = μ_i X dt + (X² ∧ |X|) dB` (stability) or `dX = μ_i X dt + dB`
/// (recurrence) with `μ_0 = -c`, `μ_i = γ` and linear birth-death switching.
fn switched_linear(p: &BTreeMap<String, f64>, n_trunc: usize, recurrence: bool) -> Result<Built> {
    positive(p, &["a", "b", "gamma", "c"])?;
    let (a, b, gamma, c) = (get(p, "a"), get(p, "b"), get(p, "gamma"), get(p, "c"));
    let mu = PerRegime::Pattern { head: vec![-c], poly: vec![gamma] };
    let (name, diffusion, rates, property, designated) = if recurrence {
        (
            "switched Ornstein-Uhlenbeck",
            DiffusionSpec::Constant { coef: PerRegime::Scalar(1.0) },
            RatesSpec { a4: Some(mu.clone()), ..Default::default() },
            Property::Recurrence,
            Criterion::SpectralRecurrenceCountable,
        )
    } else {
        (
            "switched linear drift with quadratic noise",
            DiffusionSpec::PowerClipped { coef: PerRegime::Scalar(1.0), exponent: 2.0 },
            RatesSpec { a3: Some(mu.clone()), ..Default::default() },
            Property::Stability,
            Criterion::SpectralStabilityCountable,
        )
    };
    let file = ScenarioFile {
        name: Some(name.into()),
        dimension: 1,
        regimes: RegimeSpace::CountableTruncated(n_trunc),
        drift: DriftSpec::Linear { coef: mu },
        diffusion,
        generator: GeneratorSpec::BirthDeath(BirthDeathSpec {
            law: BirthDeathLaw::Linear,
            a: Some(a),
            b: Some(b),
            birth: None,
            death: None,
        }),
        test_function: TestFunctionFile { power: 1.0 },
        rates,
        property,
        eigen_test_function: Some(PerRegime::Pattern { head: vec![], poly: vec![1.0, 1.0] }),
        partition: None,
        initial: None,
    };
    let reference = ReferenceCheck {
        condition: "a−b−γ > 0 and c−b > 0".into(),
        holds: a - b - gamma > 0.0 && c - b > 0.0,
        designated,
    };
    Ok((file, reference, Vec::new(), None))
}

/// `dX = μ_i X dt + dB` with `μ_i = i` for `i ≥ 1`, unit births and
/// deaths `a_i = i² + 2i + 2`.
fn unbounded_drift(p: &BTreeMap<String, f64>, n_trunc: usize) -> Result<Built> {
    let mu0 = get(p, "mu0");
    let mu = PerRegime::Pattern { head: vec![mu0], poly: vec![0.0, 1.0] };
    let file = ScenarioFile {
        name: Some("unbounded drift rates".into()),
        dimension: 1,
        regimes: RegimeSpace::CountableTruncated(n_trunc),
        drift: DriftSpec::Linear { coef: mu.clone() },
        diffusion: DiffusionSpec::Constant { coef: PerRegime::Scalar(1.0) },
        generator: GeneratorSpec::BirthDeath(BirthDeathSpec {
            law: BirthDeathLaw::Custom,
            a: None,
            b: None,
            birth: Some(PerRegime::Scalar(1.0)),
            death: Some(PerRegime::Pattern { head: vec![], poly: vec![2.0, 2.0, 1.0] }),
        }),
        test_function: TestFunctionFile { power: 1.0 },
        rates: RatesSpec { a4: Some(mu), ..Default::default() },
        property: Property::Recurrence,
        eigen_test_function: Some(PerRegime::Pattern { head: vec![], poly: vec![1.0, 1.0] }),
        partition: None,
        initial: None,
    };
    let reference = ReferenceCheck {
        condition: "μ₀ < −1".into(),
        holds: mu0 < -1.0,
        designated: Criterion::SpectralRecurrenceCountable,
    };
    let notes = vec![
        "the death-rate condition a_i > i²+i+1 only makes each ratio (−Ωg)_i/g_i positive, with infimum 0 over i; \
         this run uses a_i = i²+2i+2, which gives the uniform bound λ = 1 for g_i = i+1"
            .into(),
        "the regime-0 inequality is evaluated as b_0(g_1−g_0) + μ_0 g_0 ≤ −λ g_0".into(),
    ];
    Ok((file, reference, notes, None))
}

/// `dX = b_i (|X|² ∧ |X|) sgn(X) dt + σ_i (|X|² ∧ |X|) dB` on two regimes.
fn power_law(p: &BTreeMap<String, f64>) -> Result<Built> {
    positive(p, &["q"])?;
    let (b1, b2, q) = (get(p, "b1"), get(p, "b2"), get(p, "q"));
    let (s1, s2) = (get(p, "sigma1"), get(p, "sigma2"));
    let file = ScenarioFile {
        name: Some("two-regime power law".into()),
        dimension: 1,
        regimes: RegimeSpace::Finite(2),
        drift: DriftSpec::PowerClipped { coef: PerRegime::List(vec![b1, b2]), exponent: 2.0 },
        diffusion: DiffusionSpec::PowerClipped { coef: PerRegime::List(vec![s1, s2]), exponent: 2.0 },
        generator: GeneratorSpec::Dense(vec![vec![-q, q], vec![q, -q]]),
        test_function: TestFunctionFile { power: 1.0 },
        rates: RatesSpec {
            // L|x| = b_i |x|² near 0, so β_i = b_i against h = |x|².
            a1: Some(CompanionRates {
                rates: PerRegime::List(vec![b1, b2]),
                companion: Companion { power: 2.0, scale: 1.0 },
                annulus: None,
            }),
            ..Default::default()
        },
        property: Property::Stability,
        eigen_test_function: None,
        partition: None,
        initial: Some(InitialState { x0: vec![0.05], regime: 0 }),
    };
    let weighted = 0.5 * (b1 + b2);
    let reference = ReferenceCheck {
        condition: format!("Σμ_i b_i = {weighted} < 0"),
        holds: weighted < 0.0,
        designated: Criterion::Nonlinear,
    };
    let sim = SimulationDefaults { x0: 0.05, regime: 0, eps: 0.5, dt: 1e-3, horizon: 50.0, n_paths: 1000, seed: 42 };
    Ok((file, reference, Vec::new(), Some(sim)))
}
