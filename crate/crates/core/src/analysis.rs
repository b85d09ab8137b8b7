//! Runs every applicable criterion on a scenario and merges the results.

use serde::{Deserialize, Serialize};

use crate::certificates::{
    aggregate_generator, build_partition, verdict_fredholm, verdict_mmatrix, verdict_nonlinear_for_model,
    verdict_partition, MMatrixMode,
};
use crate::geometry::SphereGrid;
use crate::scenario::{default_sample_points, extract_rates, GridSpec, RateMode, RateProvenance, RateVector};
use crate::scenario_file::{Property, Scenario, ScenarioFile};
use crate::spectral::{
    principal_eigenvalue, test_function_bound, verdict_spectral_recurrence, verdict_spectral_stability,
    DEFAULT_LIMINF_FLOOR,
};
use crate::verdict::{Criterion, Verdict, VerdictKind};
use crate::{Error, Result};

/// Order in which conclusive verdicts are taken for the merged result.
pub const MERGE_PRIORITY: [Criterion; 8] = [
    Criterion::SpectralStabilityFinite,
    Criterion::SpectralRecurrenceFinite,
    Criterion::MMatrix,
    Criterion::Fredholm,
    Criterion::Nonlinear,
    Criterion::Partition,
    Criterion::SpectralStabilityCountable,
    Criterion::SpectralRecurrenceCountable,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Grid for numerically estimated rates.
    pub grid: GridSpec,
    /// Estimate rates that the scenario does not declare (all but `a1`).
    pub estimate_rates: bool,
    pub liminf_floor: f64,
    /// Overrides the partition mode of the scenario.
    pub partition_mode: Option<MMatrixMode>,
    pub rate_cap: Option<f64>,
    /// Restricts the run to these criteria; all when `None`.
    pub only: Option<Vec<Criterion>>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            estimate_rates: true,
            liminf_floor: DEFAULT_LIMINF_FLOOR,
            partition_mode: None,
            rate_cap: None,
            only: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedVerdict {
    pub verdict: VerdictKind,
    pub theorem: Criterion,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Merged {
    pub stability: Option<MergedVerdict>,
    pub recurrence: Option<MergedVerdict>,
}

/// A condition stated alongside a built-in example, evaluated on its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub condition: String,
    pub holds: bool,
    /// The criterion the example is built to exercise.
    pub designated: Criterion,
}

impl ReferenceCheck {
    pub fn line(&self) -> String {
        format!("{}: {}", self.condition, self.holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub name: String,
    pub scenario: ScenarioFile,
    pub regimes: usize,
    pub truncated: bool,
    /// One entry per criterion considered, in wire-name order.
    pub verdicts: Vec<Verdict>,
    pub merged: Merged,
    /// Hypotheses taken on trust rather than checked.
    pub assumptions: Vec<String>,
    /// Rate vectors the criteria consumed.
    pub rates: Vec<RateVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceCheck>,
}

impl AnalysisReport {
    pub fn verdict(&self, theorem: Criterion) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.theorem == theorem)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Run<'a> {
    scenario: &'a Scenario,
    opts: &'a AnalysisOptions,
    rates: Vec<RateVector>,
    assumptions: Vec<String>,
}

impl Run<'_> {
    /// Declared rates, or a grid estimate when allowed.
    fn rates(&mut self, mode: RateMode) -> Result<RateVector> {
        if let Some(r) = self.rates.iter().find(|r| r.mode == mode) {
            return Ok(r.clone());
        }
        let rv = match self.scenario.declared.get(mode) {
            Some(r) => {
                self.assumptions.push(format!("declared {} rates are taken as given", mode_name(mode)));
                r.clone()
            }
            None if mode == RateMode::CompanionNearZero => {
                return Err(Error::NotApplicable("no declared a1 rates with a companion function".into()));
            }
            None if self.opts.estimate_rates => {
                let ann = mode.default_annulus();
                let rv = extract_rates(&self.scenario.model, &self.scenario.rho, mode, ann, self.opts.grid, None)?;
                self.assumptions.push(format!(
                    "{} rates estimated on {} radii x {} directions over [{}, {}]; they bound the quotient only at grid points",
                    mode_name(mode),
                    self.opts.grid.radial_points,
                    self.opts.grid.directions,
                    ann.inner,
                    ann.outer
                ));
                rv
            }
            None => return Err(Error::NotApplicable(format!("no declared {} rates", mode_name(mode)))),
        };
        self.rates.push(rv.clone());
        Ok(rv)
    }

    fn fredholm(&mut self) -> Result<Verdict> {
        let beta = self.rates(RateMode::CompanionNearZero)?;
        verdict_fredholm(&self.scenario.model, &self.scenario.rho, &beta)
    }

    fn mmatrix(&mut self) -> Result<Verdict> {
        let q = self.scenario.model.generator.constant_matrix()?;
        let beta = self.rates(RateMode::RelativeNearZero)?;
        verdict_mmatrix(&q, &beta, &self.scenario.rho)
    }

    fn nonlinear(&mut self) -> Result<Verdict> {
        let grid = SphereGrid::default_for(self.scenario.model.dimension);
        verdict_nonlinear_for_model(&self.scenario.model, &grid)
    }

    fn partition(&mut self) -> Result<Verdict> {
        let spec = self
            .scenario
            .file
            .partition
            .clone()
            .ok_or_else(|| Error::NotApplicable("no partition thresholds given".into()))?;
        let beta = self.rates(RateMode::RelativeNearZero)?;
        let thresholds: Vec<f64> = spec.thresholds.iter().map(|t| t.unwrap_or(f64::NEG_INFINITY)).collect();
        let partition = build_partition(&beta.rates, &thresholds)?;
        let model = &self.scenario.model;
        let grid = default_sample_points(model.dimension);
        let cap = self.opts.rate_cap.unwrap_or(spec.rate_cap);
        let mut agg = aggregate_generator(&model.generator, &partition, &beta.rates, &grid, cap)?;
        if let Some(tail) = spec.tail_sup {
            let top = agg.beta_f.len() - 1;
            if tail < agg.beta_f[top] {
                return Err(Error::Validation(format!("tail_sup {tail} is below the largest retained rate {}", agg.beta_f[top])));
            }
            agg.beta_f[top] = tail;
            self.assumptions.push(format!("rates beyond the truncation are bounded above by tail_sup = {tail}"));
        }
        self.assumptions.push(format!("partition rates aggregated over {} sample points of x", grid.len()));
        let mode = self.opts.partition_mode.unwrap_or(spec.mode);
        verdict_partition(&agg, &self.scenario.rho, mode)
    }

    fn spectral(&mut self, recurrence: bool) -> Result<Verdict> {
        let model = &self.scenario.model;
        let q = model.generator.constant_matrix()?;
        let mode = if recurrence { RateMode::SpectralAtInfinity } else { RateMode::SpectralNearZero };
        let gamma = self.rates(mode)?;
        let truncated = model.regimes.is_truncated();
        let cert = match (&self.scenario.eigen_test_function, truncated) {
            (Some(g), true) => test_function_bound(g, &q, &gamma.rates, true)?,
            _ => principal_eigenvalue(&q, &gamma.rates, truncated)?,
        };
        let (rho, regimes, floor) = (&self.scenario.rho, &model.regimes, self.opts.liminf_floor);
        Ok(if recurrence {
            verdict_spectral_recurrence(&cert, rho, regimes, floor)
        } else {
            verdict_spectral_stability(&cert, rho, regimes, floor)
        })
    }
}

fn mode_name(mode: RateMode) -> &'static str {
    match mode {
        RateMode::CompanionNearZero => "a1",
        RateMode::RelativeNearZero => "a2",
        RateMode::SpectralNearZero => "a3",
        RateMode::SpectralAtInfinity => "a4",
    }
}

/// Errors that mean "hypotheses not met" become Inconclusive verdicts;
/// numerical and contract failures abort the run.
fn settle(theorem: Criterion, outcome: Result<Verdict>) -> Result<Verdict> {
    match outcome {
        Ok(v) => Ok(v),
        Err(e @ (Error::Numerical(_) | Error::Contract(_) | Error::Evaluator { .. })) => Err(e),
        Err(Error::NotApplicable(reason)) => Ok(Verdict::inconclusive(theorem, format!("not applicable: {reason}"))),
        Err(e) => Ok(Verdict::inconclusive(theorem, format!("not applicable: {e}"))),
    }
}

/// Runs every criterion applicable to `scenario`.
pub fn analyze(scenario: &Scenario, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let model = &scenario.model;
    let truncated = model.regimes.is_truncated();
    let property = scenario.file.property;
    let mut run = Run { scenario, opts, rates: Vec::new(), assumptions: Vec::new() };

    let no_equilibrium = model.equilibrium_violations();
    let stability_theorems: &[Criterion] = if truncated {
        &[Criterion::Fredholm, Criterion::MMatrix, Criterion::Nonlinear, Criterion::Partition, Criterion::SpectralStabilityCountable]
    } else {
        &[Criterion::Fredholm, Criterion::MMatrix, Criterion::Nonlinear, Criterion::Partition, Criterion::SpectralStabilityFinite]
    };
    let recurrence_theorem =
        if truncated { Criterion::SpectralRecurrenceCountable } else { Criterion::SpectralRecurrenceFinite };

    let mut planned: Vec<Criterion> = Vec::new();
    if property != Property::Recurrence {
        planned.extend_from_slice(stability_theorems);
    }
    if property != Property::Stability {
        planned.push(recurrence_theorem);
    }
    if let Some(only) = &opts.only {
        planned.retain(|c| only.contains(c));
    }
    planned.sort();

    let mut verdicts = Vec::with_capacity(planned.len());
    for theorem in planned {
        let is_stability = theorem != recurrence_theorem;
        if is_stability && !no_equilibrium.is_empty() {
            verdicts.push(Verdict::inconclusive(
                theorem,
                format!("not applicable: the origin is not an equilibrium in regimes {no_equilibrium:?}"),
            ));
            continue;
        }
        let outcome = match theorem {
            Criterion::Fredholm => run.fredholm(),
            Criterion::MMatrix => run.mmatrix(),
            Criterion::Nonlinear => run.nonlinear(),
            Criterion::Partition => run.partition(),
            Criterion::SpectralStabilityFinite | Criterion::SpectralStabilityCountable => run.spectral(false),
            Criterion::SpectralRecurrenceFinite | Criterion::SpectralRecurrenceCountable => run.spectral(true),
        };
        verdicts.push(settle(theorem, outcome)?);
    }

    check_consistency(&verdicts)?;
    let merged = merge(&verdicts);

    let mut assumptions = run.assumptions;
    assumptions.push("Lipschitz and linear-growth constants of the coefficients are assumed, not estimated".into());
    if truncated {
        assumptions.push(format!("results are computed on the truncation with {} regimes", model.num_regimes()));
        assumptions.push("the growth bound Σ_j j² q_ij(x) ≤ C(1+|x|²) on the countable space is assumed".into());
    }
    if run.rates.iter().any(|r| matches!(r.provenance, RateProvenance::NumericallyEstimated(_))) {
        assumptions.push("estimated rates are grid maxima; the inequality is not checked between grid points".into());
    }
    assumptions.dedup();

    Ok(AnalysisReport {
        name: scenario.name.clone(),
        scenario: scenario.file.clone(),
        regimes: model.num_regimes(),
        truncated,
        verdicts,
        merged,
        assumptions,
        rates: run.rates,
        reference: None,
    })
}

/// Aborts when two conclusive verdicts on the same question disagree.
pub fn check_consistency(verdicts: &[Verdict]) -> Result<()> {
    for (k, a) in verdicts.iter().enumerate() {
        for b in &verdicts[k + 1..] {
            if a.verdict.contradicts(b.verdict) {
                return Err(Error::Contract(format!(
                    "contradictory verdicts: {} says {} but {} says {}",
                    a.theorem, a.verdict, b.theorem, b.verdict
                )));
            }
        }
    }
    Ok(())
}

/// First conclusive verdict per question, in [`MERGE_PRIORITY`] order.
pub fn merge(verdicts: &[Verdict]) -> Merged {
    let pick = |stability: bool| {
        MERGE_PRIORITY.iter().find_map(|c| {
            verdicts
                .iter()
                .find(|v| v.theorem == *c && v.is_conclusive() && v.verdict.is_stability() == stability)
                .map(|v| MergedVerdict { verdict: v.verdict, theorem: v.theorem })
        })
    };
    Merged { stability: pick(true), recurrence: pick(false) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cor(b: [f64; 2]) -> Scenario {
        let text = format!(
            r#"{{
                "dimension": 1,
                "regimes": {{"finite": 2}},
                "drift": {{"power_clipped": {{"coef": [{}, {}], "exponent": 2}}}},
                "diffusion": {{"power_clipped": {{"coef": [1, 1], "exponent": 2}}}},
                "generator": {{"dense": [[-1, 1], [1, -1]]}},
                "test_function": {{"power": 1}},
                "rates": {{"a1": {{"rates": [{}, {}], "companion": {{"power": 2}}}}}}
            }}"#,
            b[0], b[1], b[0], b[1]
        );
        ScenarioFile::from_json(&text).unwrap().build().unwrap()
    }

    #[test]
    fn stable_power_law_model() {
        let report = analyze(&cor([-2.0, 1.0]), &AnalysisOptions::default()).unwrap();
        let stable = VerdictKind::AsymptoticallyStableInProbability;
        assert_eq!(report.verdict(Criterion::Fredholm).unwrap().verdict, stable);
        assert_eq!(report.verdict(Criterion::Nonlinear).unwrap().verdict, stable);
        let merged = report.merged.stability.clone().unwrap();
        assert_eq!((merged.verdict, merged.theorem), (stable, Criterion::Fredholm));
        assert!(report.verdict(Criterion::Fredholm).unwrap().notes.iter().any(|n| n == "Σμβ = -0.5"));
    }

    #[test]
    fn unstable_power_law_model() {
        let report = analyze(&cor([-1.0, 2.0]), &AnalysisOptions::default()).unwrap();
        assert_eq!(report.verdict(Criterion::Fredholm).unwrap().verdict, VerdictKind::Inconclusive);
        assert_eq!(report.merged.stability.unwrap().verdict, VerdictKind::UnstableInProbability);
    }

    #[test]
    fn contradictions_abort() {
        let a = Verdict::new(VerdictKind::AsymptoticallyStableInProbability, Criterion::MMatrix, None);
        let b = Verdict::new(VerdictKind::UnstableInProbability, Criterion::Nonlinear, None);
        assert!(matches!(check_consistency(&[a.clone(), b]), Err(Error::Contract(_))));
        let c = Verdict::new(VerdictKind::Transient, Criterion::SpectralRecurrenceFinite, None);
        assert!(check_consistency(&[a, c]).is_ok());
    }

    #[test]
    fn merge_follows_priority() {
        let stable = VerdictKind::AsymptoticallyStableInProbability;
        let vs = vec![
            Verdict::new(stable, Criterion::Fredholm, None),
            Verdict::new(stable, Criterion::MMatrix, None),
            Verdict::inconclusive(Criterion::SpectralStabilityFinite, "λ₀ ≤ 0"),
            Verdict::new(VerdictKind::PositiveRecurrent, Criterion::SpectralRecurrenceFinite, None),
        ];
        let m = merge(&vs);
        assert_eq!(m.stability.unwrap().theorem, Criterion::MMatrix);
        assert_eq!(m.recurrence.unwrap().theorem, Criterion::SpectralRecurrenceFinite);
    }

    #[test]
    fn report_round_trips() {
        let report = analyze(&cor([-2.0, 1.0]), &AnalysisOptions::default()).unwrap();
        let back: AnalysisReport = serde_json::from_str(&report.to_json_pretty()).unwrap();
        assert_eq!(back, report);
    }
}
