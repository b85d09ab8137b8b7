use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::stability_kind;
use crate::chain::{stationary_distribution, ProbabilityVector};
use crate::linalg::{lu_solve, max_abs, pairwise_sum};
use crate::scenario::{RateMode, RateProvenance, RateVector, ScenarioModel, TestFunctionSpec};
use crate::verdict::{Certificate, Criterion, Verdict};
use crate::{Error, Result};

/// Largest admissible `‖Qξ + c1 + β‖_∞`.
pub const FREDHOLM_RESIDUAL_TOL: f64 = 1e-9;

/// The pair `(c, ξ)` with `Qξ = -c1 - β`, `c = -Σ μ_i β_i > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FredholmCertificate {
    pub c: f64,
    pub xi: Vec<f64>,
    pub residual: f64,
    pub mu: ProbabilityVector,
}

/// `Σ μ_i β_i`.
pub fn weighted_rate(mu: &ProbabilityVector, beta: &[f64]) -> Result<f64> {
    if mu.len() != beta.len() {
        return Err(Error::Shape(format!("{} weights but {} rates", mu.len(), beta.len())));
    }
    let terms: Vec<f64> = mu.as_slice().iter().zip(beta).map(|(m, b)| m * b).collect();
    Ok(pairwise_sum(&terms))
}

/// Solves the Poisson equation `Qξ = -c1 - β` pinned by `ξ_{N-1} = 0`.
///
/// The right side has zero `μ`-mean, so the system is consistent; dropping
/// the last equation and unknown leaves a nonsingular principal block of an
/// irreducible generator.
pub fn fredholm_solve(q: &DMatrix<f64>, beta: &[f64]) -> Result<FredholmCertificate> {
    let mu = stationary_distribution(q)?;
    let s = weighted_rate(&mu, beta)?;
    if !(s < 0.0) {
        return Err(Error::NotApplicable(format!("Σμβ = {s} is not negative")));
    }
    let c = -s;
    let n = q.nrows();
    let rhs: Vec<f64> = beta.iter().map(|b| -c - b).collect();
    let block = q.view((0, 0), (n - 1, n - 1)).into_owned();
    let mut xi = lu_solve(&block, &rhs[..n - 1])?;
    xi.push(0.0);
    let residual = max_abs((0..n).map(|i| (0..n).map(|j| q[(i, j)] * xi[j]).sum::<f64>() + c + beta[i]));
    if residual > FREDHOLM_RESIDUAL_TOL {
        return Err(Error::Numerical(format!("Poisson solve residual {residual:e} exceeds {FREDHOLM_RESIDUAL_TOL:e}")));
    }
    Ok(FredholmCertificate { c, xi, residual, mu })
}

/// Stability verdict from averaging `A1` rates against the invariant measure.
pub fn verdict_fredholm(model: &ScenarioModel, rho: &TestFunctionSpec, beta: &RateVector) -> Result<Verdict> {
    let theorem = Criterion::Fredholm;
    if beta.mode != RateMode::CompanionNearZero {
        return Err(Error::Validation(format!("averaging criterion needs a1 rates, got {:?}", beta.mode)));
    }
    let q = model.generator.constant_matrix()?;
    let mu = stationary_distribution(&q)?;
    let s = weighted_rate(&mu, &beta.rates)?;
    let mut notes = Vec::new();
    if let RateProvenance::Declared = beta.provenance {
        notes.push("declared a1 rates and companion limits are taken as given".to_string());
    }
    if model.regimes.is_truncated() {
        notes.push(format!("computed on the truncation with {} regimes", model.num_regimes()));
    }
    if !(s < 0.0) {
        let mut v = Verdict::inconclusive(theorem, format!("Σμβ = {s} is not negative"));
        v.notes.extend(notes);
        return Ok(v);
    }
    let cert = fredholm_solve(&q, &beta.rates)?;
    let mut v = Verdict::new(stability_kind(rho), theorem, Some(Certificate::Fredholm(cert)))
        .with_note(format!("Σμβ = {s}"));
    v.notes.extend(notes);
    Ok(v)
}
