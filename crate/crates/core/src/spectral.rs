//! The operator `Ω = Q + diag(γ)`, its bilinear form
//! `E(f) = ½ ΣΣ π_i q_ij (f_j - f_i)² - Σ π_i γ_i f_i² = <f, -Ωf>_π`, and the
//! principal eigenvalue `λ₀ = inf { E(f) : ‖f‖_π = 1 }`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::chain::{reversing_measure, worst_balance_defect, ProbabilityVector, Reversibility};
use crate::linalg::{max_abs, BandLu};
use crate::scenario::{InfinityBehavior, RegimeSpace, TestFunctionSpec};
use crate::certificates::stability_kind;
use crate::verdict::{Certificate, Criterion, Verdict, VerdictKind};
use crate::{Error, Result};

/// Largest size handled by the dense symmetric eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 2000;
/// Target accuracy of the bisection path for larger chains.
pub const BISECTION_TOL: f64 = 1e-10;
/// Default lower bound on `min g / max g` accepted as evidence for
/// `liminf g_i > 0` on a truncation.
pub const DEFAULT_LIMINF_FLOOR: f64 = 1e-9;

/// `Ωf(i) = Σ_{j≠i} q_ij (f_j - f_i) + γ_i f_i` for a constant generator.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaOperator {
    q: DMatrix<f64>,
    gamma: Vec<f64>,
}

impl OmegaOperator {
    pub fn new(q: DMatrix<f64>, gamma: Vec<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() != gamma.len() {
            return Err(Error::Shape(format!(
                "generator is {}×{} but γ has {} entries",
                q.nrows(),
                q.ncols(),
                gamma.len()
            )));
        }
        Ok(Self { q, gamma })
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Exit rate `q_i = Σ_{j≠i} q_ij`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        (0..self.len()).filter(|&j| j != i).map(|j| self.q[(i, j)]).sum()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..n {
                    let qij = self.q[(i, j)];
                    if j != i && qij != 0.0 {
                        acc += qij * (f[j] - f[i]);
                    }
                }
                acc + self.gamma[i] * f[i]
            })
            .collect()
    }

    /// The matrix of `-Ω`, with the diagonal rebuilt from the exit rates.
    pub fn neg_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| if i == j { self.exit_rate(i) - self.gamma[i] } else { -self.q[(i, j)] })
    }
}

/// `⟨f, g⟩_π`.
pub fn inner(pi: &[f64], f: &[f64], g: &[f64]) -> f64 {
    pi.iter().zip(f).zip(g).map(|((p, a), b)| p * a * b).sum()
}

/// `E(f)`; may be negative.
pub fn bilinear_form(f: &[f64], pi: &[f64], q: &DMatrix<f64>, gamma: &[f64]) -> Result<f64> {
    let n = q.nrows();
    if f.len() != n || pi.len() != n || gamma.len() != n || q.ncols() != n {
        return Err(Error::Shape("f, π, Q and γ must have matching sizes".into()));
    }
    let mut dirichlet = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && q[(i, j)] != 0.0 {
                let d = f[j] - f[i];
                dirichlet += pi[i] * q[(i, j)] * d * d;
            }
        }
    }
    let killing: f64 = (0..n).map(|i| pi[i] * gamma[i] * f[i] * f[i]).sum();
    Ok(0.5 * dirichlet - killing)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenKind {
    ExactFinite,
    TestFunctionBound,
    LocalizedSequence,
}

/// Eigenpair or lower bound backing a spectral verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenCertificate {
    pub kind: EigenKind,
    pub lambda0: f64,
    pub g: Vec<f64>,
    /// `‖Ωg + λ₀g‖_∞` for exact eigenpairs; `0` for bounds.
    pub residual: f64,
    pub regimes: usize,
    /// Set when the space is a truncation of a countable one.
    pub truncated: bool,
    /// `(-Ωg)_N / g_N` at the last retained regime (bounds only).
    pub tail_ratio: Option<f64>,
    /// For localized sequences, `λ_{nm}` per set in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequence: Vec<f64>,
}

impl EigenCertificate {
    pub fn min_g(&self) -> f64 {
        self.g.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_g(&self) -> f64 {
        self.g.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_reversible(q: &DMatrix<f64>, pi: &[f64]) -> Result<()> {
    if pi.len() != q.nrows() {
        return Err(Error::Shape(format!("π has {} entries for {} regimes", pi.len(), q.nrows())));
    }
    if let Some((i, j, defect)) = worst_balance_defect(q, pi) {
        return Err(Error::Validation(format!("generator is not π-reversible: defect {defect:e} on ({i}, {j})")));
    }
    Ok(())
}

/// `D^{1/2} (-Ω) D^{-1/2}` with `D = diag π`, symmetrized against rounding.
fn symmetrized(neg: &DMatrix<f64>, pi: &[f64]) -> DMatrix<f64> {
    let n = neg.nrows();
    let s: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let mut m = DMatrix::from_fn(n, n, |i, j| neg[(i, j)] * s[i] / s[j]);
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Factors `-Ω - sI` without pivoting; succeeds exactly when `s < λ₀`
/// (for irreducible chains the shifted matrix is then a nonsingular M-matrix).
fn shifted_factor(neg: &DMatrix<f64>, s: f64) -> Option<BandLu> {
    let mut shifted = neg.clone();
    for i in 0..shifted.nrows() {
        shifted[(i, i)] -= s;
    }
    BandLu::factor(&shifted, 0.0).ok()
}

/// Positive eigenfunction for `λ₀` by inverse iteration at a shift just
/// below it. Each solve maps positive vectors to positive vectors, so the
/// iterates keep strictly positive entries with full relative accuracy.
fn positive_eigenfunction(neg: &DMatrix<f64>, lambda0: f64, gap: f64, pi: &[f64]) -> Result<Vec<f64>> {
    let n = neg.nrows();
    let scale = neg.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut delta = (1e-8 * scale).max(1e-6 * gap.min(scale));
    let lu = loop {
        if let Some(lu) = shifted_factor(neg, lambda0 - delta) {
            break lu;
        }
        delta *= 100.0;
        if delta > 1e3 * scale {
            return Err(Error::Numerical("no positive shifted factorization below λ₀".into()));
        }
    };
    let mut g = vec![1.0; n];
    for _ in 0..200 {
        let mut next = lu.solve(&g);
        let norm = inner(pi, &next, &next).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Numerical("inverse iteration broke down".into()));
        }
        next.iter_mut().for_each(|v| *v /= norm);
        let change = max_abs(next.iter().zip(&g).map(|(a, b)| (a - b) / a.abs().max(f64::MIN_POSITIVE)));
        g = next;
        if change < 1e-15 {
            break;
        }
    }
    Ok(g)
}

/// Largest `s` with `-Ω - sI` factoring with positive pivots, by bisection.
fn bisect_lambda0(neg: &DMatrix<f64>) -> Result<f64> {
    let n = neg.nrows();
    // Gershgorin: every eigenvalue of -Ω is at least min_i (diag_i - Σ_j |off_ij|).
    let mut lo = (0..n)
        .map(|i| neg[(i, i)] - (0..n).filter(|&j| j != i).map(|j| neg[(i, j)].abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| neg[(i, i)]).fold(f64::INFINITY, f64::min);
    lo -= 1e-12 * lo.abs().max(1.0);
    if shifted_factor(neg, lo).is_none() {
        return Err(Error::Numerical("Gershgorin shift does not factor".into()));
    }
    let tol = BISECTION_TOL * hi.abs().max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if shifted_factor(neg, mid).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn finish_exact(op: &OmegaOperator, lambda0: f64, mut g: Vec<f64>, pi: &[f64], truncated: bool) -> Result<EigenCertificate> {
    if inner(pi, &g, &vec![1.0; g.len()]) < 0.0 {
        g.iter_mut().for_each(|v| *v = -*v);
    }
    if let Some(i) = g.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Contract(format!("principal eigenfunction has nonpositive entry g[{i}] = {}", g[i])));
    }
    let og = op.apply(&g);
    let residual = max_abs(og.iter().zip(&g).map(|(a, b)| a + lambda0 * b));
    Ok(EigenCertificate {
        kind: EigenKind::ExactFinite,
        lambda0,
        g,
        residual,
        regimes: op.len(),
        truncated,
        tail_ratio: None,
        sequence: Vec::new(),
    })
}

/// Minimal eigenvalue of `-Ω` and its positive eigenfunction, normalized to
/// `‖g‖_π = 1`. Requires `Q` to be `π`-reversible.
pub fn principal_eigenvalue_finite(pi: &ProbabilityVector, q: &DMatrix<f64>, gamma: &[f64]) -> Result<EigenCertificate> {
    principal_eigenvalue_impl(pi.as_slice(), q, gamma, false)
}

/// As [`principal_eigenvalue_finite`], computing `π` first.
pub fn principal_eigenvalue(q: &DMatrix<f64>, gamma: &[f64], truncated: bool) -> Result<EigenCertificate> {
    match reversing_measure(q)? {
        Reversibility::Reversible(pi) => principal_eigenvalue_impl(pi.as_slice(), q, gamma, truncated),
        Reversibility::NotReversible { i, j, defect } => Err(Error::Validation(format!(
            "generator is not reversible: detailed balance fails on ({i}, {j}) by {defect:e}"
        ))),
    }
}

fn principal_eigenvalue_impl(pi: &[f64], q: &DMatrix<f64>, gamma: &[f64], truncated: bool) -> Result<EigenCertificate> {
    let op = OmegaOperator::new(q.clone(), gamma.to_vec())?;
    check_reversible(q, pi)?;
    let neg = op.neg_matrix();
    let n = op.len();
    let (lambda0, gap, g) = if n <= DENSE_EIGEN_LIMIT {
        let eig = SymmetricEigen::new(symmetrized(&neg, pi));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let lambda0 = eig.eigenvalues[order[0]];
        let gap = if n > 1 { eig.eigenvalues[order[1]] - lambda0 } else { f64::INFINITY };
        let v = eig.eigenvectors.column(order[0]);
        let g: Vec<f64> = (0..n).map(|i| v[i] / pi[i].sqrt()).collect();
        (lambda0, gap, g)
    } else {
        let lambda0 = bisect_lambda0(&neg)?;
        (lambda0, 0.0, Vec::new())
    };
    let g_pos = positive_eigenfunction(&neg, lambda0, gap, pi)?;
    // The inverse-iteration vector is positive by construction; fall back to
    // the dense eigenvector only if it somehow is not.
    let g = if g_pos.iter().all(|v| *v > 0.0) { g_pos } else { g };
    finish_exact(&op, lambda0, g, pi, truncated)
}

/// Lower bound `λ = min_i (-Ωg)_i / g_i` from a positive test function.
/// On a reflecting truncation the last index uses the reflected generator;
/// its ratio is reported separately as a tail diagnostic.
pub fn test_function_bound(g: &[f64], q: &DMatrix<f64>, gamma: &[f64], truncated: bool) -> Result<EigenCertificate> {
    let op = OmegaOperator::new(q.clone(), gamma.to_vec())?;
    if g.len() != op.len() {
        return Err(Error::Shape(format!("g has {} entries for {} regimes", g.len(), op.len())));
    }
    if let Some(i) = g.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("test function must be positive, g[{i}] = {}", g[i])));
    }
    let og = op.apply(g);
    let ratios: Vec<f64> = og.iter().zip(g).map(|(o, gi)| -o / gi).collect();
    let lambda = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EigenCertificate {
        kind: EigenKind::TestFunctionBound,
        lambda0: lambda,
        g: g.to_vec(),
        residual: 0.0,
        regimes: op.len(),
        truncated,
        tail_ratio: ratios.last().copied(),
        sequence: Vec::new(),
    })
}

/// `G_{nm} = { i : g_i ≥ 1/m, |γ_i| ∨ q_i ≤ n }`.
pub fn localization_set(op: &OmegaOperator, g: &[f64], n: f64, m: f64) -> Vec<usize> {
    (0..op.len())
        .filter(|&i| g[i] >= 1.0 / m && op.gamma[i].abs().max(op.exit_rate(i)) <= n)
        .collect()
}

/// Minimal eigenvalue of the form restricted to functions supported on
/// `set`. Jumps out of the set act as killing at rate `q_i - q(i, G)`,
/// which is what the principal block of `-Ω` encodes.
pub fn localized_eigenvalue_on(pi: &[f64], q: &DMatrix<f64>, gamma: &[f64], set: &[usize]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Domain("empty localization set".into()));
    }
    let op = OmegaOperator::new(q.clone(), gamma.to_vec())?;
    check_reversible(q, pi)?;
    let neg = op.neg_matrix();
    let k = set.len();
    let block = DMatrix::from_fn(k, k, |a, b| neg[(set[a], set[b])]);
    let sub_pi: Vec<f64> = set.iter().map(|&i| pi[i]).collect();
    let eig = SymmetricEigen::new(symmetrized(&block, &sub_pi));
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `λ_{nm}` on `G_{nm}` built from the reference function `g`.
pub fn localized_eigenvalue(pi: &[f64], q: &DMatrix<f64>, gamma: &[f64], g_reference: &[f64], n: f64, m: f64) -> Result<f64> {
    let op = OmegaOperator::new(q.clone(), gamma.to_vec())?;
    if g_reference.len() != op.len() {
        return Err(Error::Shape("reference function has the wrong length".into()));
    }
    let set = localization_set(&op, g_reference, n, m);
    localized_eigenvalue_on(pi, q, gamma, &set)
}

/// Localized eigenvalues along an increasing sequence of sets.
pub fn localized_sequence(pi: &[f64], q: &DMatrix<f64>, gamma: &[f64], sets: &[Vec<usize>]) -> Result<EigenCertificate> {
    let sequence = sets
        .iter()
        .map(|s| localized_eigenvalue_on(pi, q, gamma, s))
        .collect::<Result<Vec<_>>>()?;
    let lambda0 = sequence.last().copied().ok_or_else(|| Error::Domain("no localization sets".into()))?;
    Ok(EigenCertificate {
        kind: EigenKind::LocalizedSequence,
        lambda0,
        g: Vec::new(),
        residual: 0.0,
        regimes: q.nrows(),
        truncated: false,
        tail_ratio: None,
        sequence,
    })
}

/// `(E(f), ⟨f²/g, -Ωg⟩_π)`; the first is never below the second.
pub fn variational_check(f: &[f64], g: &[f64], pi: &[f64], q: &DMatrix<f64>, gamma: &[f64]) -> Result<(f64, f64)> {
    if let Some(i) = g.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("g must be strictly positive, g[{i}] = {}", g[i])));
    }
    if f.len() != g.len() {
        return Err(Error::Shape("f and g differ in length".into()));
    }
    let e = bilinear_form(f, pi, q, gamma)?;
    let op = OmegaOperator::new(q.clone(), gamma.to_vec())?;
    let og = op.apply(g);
    let rhs = (0..f.len()).map(|i| pi[i] * f[i] * f[i] / g[i] * -og[i]).sum();
    Ok((e, rhs))
}

fn liminf_check(cert: &EigenCertificate, floor: f64, notes: &mut Vec<String>) -> bool {
    let ratio = cert.min_g() / cert.max_g();
    notes.push(format!(
        "liminf g_i > 0 checked on the truncation only: min g / max g = {ratio:e} (floor {floor:e})"
    ));
    ratio >= floor
}

fn bound_notes(cert: &EigenCertificate, notes: &mut Vec<String>) {
    if cert.kind == EigenKind::TestFunctionBound {
        notes.push(format!("λ is a test-function lower bound on the truncation with {} regimes", cert.regimes));
        if let Some(t) = cert.tail_ratio {
            notes.push(format!("tail ratio at the last retained regime: {t}"));
        }
    }
}

/// Stability from a positive principal eigenvalue with `A3` rates.
pub fn verdict_spectral_stability(
    cert: &EigenCertificate,
    rho: &TestFunctionSpec,
    regimes: &RegimeSpace,
    liminf_floor: f64,
) -> Verdict {
    let countable = regimes.is_truncated();
    let theorem = if countable { Criterion::SpectralStabilityCountable } else { Criterion::SpectralStabilityFinite };
    let mut notes = vec![format!("λ₀ = {}", cert.lambda0)];
    bound_notes(cert, &mut notes);
    let mut kind = if cert.lambda0 > 0.0 { stability_kind(rho) } else { VerdictKind::Inconclusive };
    if cert.lambda0 <= 0.0 {
        notes.push("λ₀ is not positive".into());
    }
    if countable && kind.is_conclusive() {
        notes.push("attainability of λ₀ on the countable space is a user assertion".into());
        if kind == VerdictKind::AsymptoticallyStableInProbability && !liminf_check(cert, liminf_floor, &mut notes) {
            kind = VerdictKind::Inconclusive;
        }
    }
    let mut v = Verdict::new(kind, theorem, Some(Certificate::Eigen(cert.clone())));
    v.notes = notes;
    v
}

/// Recurrence or transience from a positive eigenvalue or bound with `A4` rates.
pub fn verdict_spectral_recurrence(
    cert: &EigenCertificate,
    rho: &TestFunctionSpec,
    regimes: &RegimeSpace,
    liminf_floor: f64,
) -> Verdict {
    let countable = regimes.is_truncated();
    let theorem = if countable { Criterion::SpectralRecurrenceCountable } else { Criterion::SpectralRecurrenceFinite };
    let mut notes = vec![format!("λ = {}", cert.lambda0)];
    bound_notes(cert, &mut notes);
    let mut kind = if !(cert.lambda0 > 0.0) {
        notes.push("λ is not positive".into());
        VerdictKind::Inconclusive
    } else {
        match rho.at_infinity {
            InfinityBehavior::BlowsUpAtInfinity if countable => VerdictKind::Recurrent,
            InfinityBehavior::BlowsUpAtInfinity => VerdictKind::PositiveRecurrent,
            InfinityBehavior::VanishesAtInfinity => VerdictKind::Transient,
            InfinityBehavior::Unspecified => {
                notes.push("test function has no declared behavior at infinity".into());
                VerdictKind::Inconclusive
            }
        }
    };
    if countable && kind == VerdictKind::Recurrent {
        notes.push("attainability of λ on the countable space is a user assertion".into());
        if !liminf_check(cert, liminf_floor, &mut notes) {
            kind = VerdictKind::Inconclusive;
        }
    }
    let mut v = Verdict::new(kind, theorem, Some(Certificate::Eigen(cert.clone())));
    v.notes = notes;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> (ProbabilityVector, DMatrix<f64>) {
        let q = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        (ProbabilityVector::new(vec![0.5, 0.5]).unwrap(), q)
    }

    #[test]
    fn bilinear_form_examples() {
        let (pi, q) = two_state();
        assert_eq!(bilinear_form(&[1.0, 1.0], pi.as_slice(), &q, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(bilinear_form(&[1.0, 0.0], pi.as_slice(), &q, &[1.0, -3.0]).unwrap(), 0.0);
        assert_eq!(bilinear_form(&[1.0, 1.0], pi.as_slice(), &q, &[-2.5, -2.5]).unwrap(), 2.5);
    }

    #[test]
    fn two_state_eigenvalues() {
        let (pi, q) = two_state();
        let c = principal_eigenvalue_finite(&pi, &q, &[-1.0, -3.0]).unwrap();
        assert!((c.lambda0 - (3.0 - 2f64.sqrt())).abs() < 1e-12);
        assert!(c.residual < 1e-12 && c.min_g() > 0.0);
        let c = principal_eigenvalue_finite(&pi, &q, &[1.0, -3.0]).unwrap();
        assert!((c.lambda0 - (2.0 - 5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn constant_killing_gives_constant_g() {
        let (pi, q) = two_state();
        let c = principal_eigenvalue_finite(&pi, &q, &[-0.7, -0.7]).unwrap();
        assert!((c.lambda0 - 0.7).abs() < 1e-14);
        assert!((c.g[0] - c.g[1]).abs() < 1e-14);
        let b = test_function_bound(&[2.0, 2.0], &q, &[-0.7, -0.7], false).unwrap();
        assert!((b.lambda0 - 0.7).abs() < 1e-15);
    }

    #[test]
    fn single_point_localization() {
        let (pi, q) = two_state();
        let l = localized_eigenvalue_on(pi.as_slice(), &q, &[1.0, -3.0], &[1]).unwrap();
        assert!((l - 4.0).abs() < 1e-15);
    }

    #[test]
    fn non_reversible_rejected() {
        let q = DMatrix::from_row_slice(3, 3, &[-3.0, 2.0, 1.0, 1.0, -2.0, 1.0, 1.0, 1.0, -2.0]);
        assert!(principal_eigenvalue(&q, &[0.0, 0.0, -1.0], false).is_err());
    }

    #[test]
    fn bisection_agrees_with_dense() {
        let n = 40;
        let mut q = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            q[(i, i + 1)] = 1.0;
            q[(i + 1, i)] = 2.0;
        }
        for i in 0..n {
            q[(i, i)] = -(0..n).filter(|&j| j != i).map(|j| q[(i, j)]).sum::<f64>();
        }
        let gamma: Vec<f64> = (0..n).map(|i| if i == 0 { -1.0 } else { 0.3 }).collect();
        let dense = principal_eigenvalue(&q, &gamma, false).unwrap();
        let op = OmegaOperator::new(q, gamma).unwrap();
        let l = bisect_lambda0(&op.neg_matrix()).unwrap();
        assert!((l - dense.lambda0).abs() < 1e-9, "{l} vs {}", dense.lambda0);
    }
}
