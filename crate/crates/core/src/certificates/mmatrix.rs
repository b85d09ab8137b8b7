use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::stability_kind;
use crate::linalg::BandLu;
use crate::scenario::{RateMode, RateVector, TestFunctionSpec};
use crate::verdict::{Certificate, Criterion, Verdict};
use crate::{Error, Result};

/// Upper bound on witness entries in the semipositivity program.
pub const LP_ETA_MAX: f64 = 1e6;
/// The program accepts when its optimal margin exceeds this value.
pub const LP_ACCEPT_TOL: f64 = 1e-9;
/// Pivots at or below `PIVOT_TOL · max|a_ij|` count as nonpositive.
const PIVOT_TOL: f64 = 1e-12;
/// Eigenvalues with `|Im λ| ≤ REAL_TOL · max(1, |λ|)` are treated as real.
const REAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MMatrixMode {
    /// Requires a Z-matrix, then tests leading principal minors.
    ZMatrixLeadingMinors,
    /// Tests leading principal minors of any square matrix. Only a proof of
    /// the M-matrix property for Z-matrices.
    LeadingMinorsOnly,
    /// Solves for `η ≥ 1` with `Aη ≫ 0`.
    Semipositivity,
}

/// Accepted test, with the evidence it rests on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MMatrixCertificate {
    pub matrix: Vec<Vec<f64>>,
    pub mode: MMatrixMode,
    /// Leading principal minors (minor modes); `None` if a product overflowed,
    /// in which case `pivots` still carries the evidence.
    pub minors: Option<Vec<f64>>,
    /// Ratios of consecutive leading minors.
    pub pivots: Vec<f64>,
    /// A positive vector `η` with `Aη ≫ 0`: the program's optimum in
    /// semipositivity mode, `A⁻¹1` in Z-matrix mode.
    pub witness: Option<Vec<f64>>,
    /// `Aη` for the witness.
    pub image: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MMatrixRejection {
    pub mode: MMatrixMode,
    pub reason: String,
    /// Leading minors up to and including the first nonpositive one.
    pub minors: Vec<f64>,
    /// Optimal margin of the semipositivity program.
    pub lp_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum MMatrixOutcome {
    Accepted(MMatrixCertificate),
    Rejected(MMatrixRejection),
}

impl MMatrixOutcome {
    pub fn accepted(&self) -> bool {
        matches!(self, Self::Accepted(_))
    }

    pub fn certificate(&self) -> Option<&MMatrixCertificate> {
        match self {
            Self::Accepted(c) => Some(c),
            Self::Rejected(_) => None,
        }
    }
}

pub fn is_z_matrix(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] <= 0.0))
}

fn rows_of(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn mat_vec(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * v[j]).sum()).collect()
}

fn running_products(pivots: &[f64]) -> Vec<f64> {
    pivots
        .iter()
        .scan(1.0, |acc, p| {
            *acc *= p;
            Some(*acc)
        })
        .collect()
}

fn minors_test(a: &DMatrix<f64>, mode: MMatrixMode) -> MMatrixOutcome {
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    match BandLu::factor(a, PIVOT_TOL * scale) {
        Ok(lu) => {
            let pivots = lu.pivots();
            let minors = running_products(&pivots);
            let minors = minors.iter().all(|m| m.is_finite() && *m > 0.0).then_some(minors);
            let witness = (mode == MMatrixMode::ZMatrixLeadingMinors).then(|| lu.solve(&vec![1.0; a.nrows()]));
            let image = witness.as_ref().map(|w| mat_vec(a, w));
            MMatrixOutcome::Accepted(MMatrixCertificate {
                matrix: rows_of(a),
                mode,
                minors,
                pivots,
                witness,
                image,
            })
        }
        Err((k, pivots)) => {
            let minors = running_products(&pivots);
            let value = minors.last().copied().unwrap_or(0.0);
            MMatrixOutcome::Rejected(MMatrixRejection {
                mode,
                reason: format!("leading principal minor {} is {value} (not positive)", k + 1),
                minors,
                lp_margin: None,
            })
        }
    }
}

/// Maximizes `t` subject to `Aη ≥ t1`, `1 ≤ η ≤ LP_ETA_MAX`.
fn semipositivity_program(a: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let n = a.nrows();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let eta: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (1.0, LP_ETA_MAX))).collect();
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for i in 0..n {
        let mut expr = LinearExpr::empty();
        for j in 0..n {
            if a[(i, j)] != 0.0 {
                expr.add(eta[j], a[(i, j)]);
            }
        }
        expr.add(t, -1.0);
        lp.add_constraint(expr, ComparisonOp::Ge, 0.0);
    }
    let sol = lp.solve().map_err(|e| Error::Numerical(format!("semipositivity program: {e}")))?;
    Ok((*sol.var_value(t), eta.iter().map(|v| *sol.var_value(*v)).collect()))
}

fn semipositivity_test(a: &DMatrix<f64>) -> Result<MMatrixOutcome> {
    let (margin, eta) = semipositivity_program(a)?;
    let image = mat_vec(a, &eta);
    let min_image = image.iter().copied().fold(f64::INFINITY, f64::min);
    let min_eta = eta.iter().copied().fold(f64::INFINITY, f64::min);
    if margin > LP_ACCEPT_TOL && min_image > 0.0 && min_eta >= 1.0 - 1e-12 {
        let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let pivots = match BandLu::factor(a, PIVOT_TOL * scale) {
            Ok(lu) => lu.pivots(),
            Err((_, p)) => p,
        };
        return Ok(MMatrixOutcome::Accepted(MMatrixCertificate {
            matrix: rows_of(a),
            mode: MMatrixMode::Semipositivity,
            minors: None,
            pivots,
            witness: Some(eta),
            image: Some(image),
        }));
    }
    let reason = if margin > LP_ACCEPT_TOL {
        format!("program margin {margin:e} but recomputed min(Aη) = {min_image:e}")
    } else {
        format!("no η ≥ 1 with Aη ≫ 0: optimal margin {margin:e}")
    };
    Ok(MMatrixOutcome::Rejected(MMatrixRejection {
        mode: MMatrixMode::Semipositivity,
        reason,
        minors: Vec::new(),
        lp_margin: Some(margin),
    }))
}

/// Tests whether `A` is a nonsingular M-matrix (minor modes) or
/// semipositive (semipositivity mode).
pub fn is_nonsingular_m_matrix(a: &DMatrix<f64>, mode: MMatrixMode) -> Result<MMatrixOutcome> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::Shape(format!("matrix is {}×{}, expected nonempty square", a.nrows(), a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    match mode {
        MMatrixMode::ZMatrixLeadingMinors => {
            if !is_z_matrix(a) {
                return Err(Error::ModeMismatch);
            }
            Ok(minors_test(a, mode))
        }
        MMatrixMode::LeadingMinorsOnly => Ok(minors_test(a, mode)),
        MMatrixMode::Semipositivity => semipositivity_test(a),
    }
}

/// Eigenvalues via a capped Schur iteration. The unshifted QR sweep can
/// stall on permutation-like matrices, so failures are retried on `A + sI`.
fn eigenvalues(a: &DMatrix<f64>) -> Option<Vec<nalgebra::Complex<f64>>> {
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    [0.0, 0.37, -0.61, 1.13].iter().find_map(|k| {
        let s = k * scale;
        let shifted = a + DMatrix::identity(a.nrows(), a.ncols()) * s;
        let schur = shifted.try_schur(f64::EPSILON, 10_000)?;
        Some(schur.complex_eigenvalues().iter().map(|z| z - s).collect())
    })
}

/// Whether every real eigenvalue of `A` is positive.
///
/// The eigenvalue of least real part is always counted as real: for a
/// Z-matrix it is (Perron root of `sI - A`), and a defective eigenvalue can
/// pick up an imaginary part of order `ε^(1/n)` from rounding.
pub fn all_real_eigenvalues_positive(a: &DMatrix<f64>) -> bool {
    let Some(eig) = eigenvalues(a) else {
        return false;
    };
    let lowest = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    eig.iter()
        .filter(|z| z.re == lowest || z.im.abs() <= REAL_TOL * z.norm().max(1.0))
        .all(|z| z.re > 1e-9)
}

/// M-matrix criterion on `A = -(Q + diag β̄)` with `A2` rates.
pub fn verdict_mmatrix(q: &DMatrix<f64>, beta_bar: &RateVector, rho: &TestFunctionSpec) -> Result<Verdict> {
    let theorem = Criterion::MMatrix;
    if beta_bar.mode != RateMode::RelativeNearZero {
        return Err(Error::Validation(format!("M-matrix criterion needs a2 rates, got {:?}", beta_bar.mode)));
    }
    let n = q.nrows();
    if beta_bar.len() != n {
        return Err(Error::Shape(format!("{n} regimes but {} rates", beta_bar.len())));
    }
    let a = DMatrix::from_fn(n, n, |i, j| -q[(i, j)] - if i == j { beta_bar.rates[i] } else { 0.0 });
    let mode = MMatrixMode::ZMatrixLeadingMinors;
    match is_nonsingular_m_matrix(&a, mode)? {
        MMatrixOutcome::Accepted(cert) => {
            let xi = cert.witness.as_deref().unwrap_or_default();
            if xi.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Numerical("M-matrix witness A⁻¹1 is not positive".into()));
            }
            Ok(Verdict::new(stability_kind(rho), theorem, Some(Certificate::MMatrix(cert))).with_mode(mode))
        }
        MMatrixOutcome::Rejected(rej) => Ok(Verdict::inconclusive(theorem, rej.reason).with_mode(mode)),
    }
}
