use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{is_nonsingular_m_matrix, stability_kind, MMatrixMode, MMatrixOutcome};
use crate::scenario::{SwitchingGenerator, TestFunctionSpec};
use crate::verdict::{Certificate, Criterion, PartitionCertificate, Verdict};
use crate::{Error, Result};

/// Default bound on `q_i(x)` over the sample grid.
pub const DEFAULT_RATE_CAP: f64 = 1e6;
/// Largest number of classes handled.
const MAX_CLASSES: usize = 50;

/// Classes `F_k = {j : β̄_j ∈ (k_{k-1}, k_k]}` with `k_0 = -∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Upper class boundaries; the last equals `max β̄`.
    pub thresholds: Vec<f64>,
    pub classes: Vec<Vec<usize>>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    fn class_of(&self, n: usize) -> Vec<usize> {
        let mut of = vec![usize::MAX; n];
        for (k, class) in self.classes.iter().enumerate() {
            for &j in class {
                of[j] = k;
            }
        }
        of
    }
}

/// Aggregated rates and generator of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionAggregate {
    pub partition: Partition,
    /// `β^F_k = max_{j ∈ F_k} β̄_j`.
    pub beta_f: Vec<f64>,
    /// Aggregated generator; rows sum to zero.
    pub q_f: Vec<Vec<f64>>,
    /// Upper-triangular all-ones matrix.
    pub h: Vec<Vec<f64>>,
    pub grid_points: usize,
    /// Largest `q_i(x)` met on the grid.
    pub max_exit_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionOptions {
    pub mode: MMatrixMode,
    pub rate_cap: f64,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self { mode: MMatrixMode::Semipositivity, rate_cap: DEFAULT_RATE_CAP }
    }
}

/// Bins `β̄` by `thresholds`. Leading `-∞` entries are dropped (the lowest
/// class is always open below), the last threshold must reach `max β̄`,
/// and empty classes are deleted together with their upper boundary.
pub fn build_partition(beta_bar: &[f64], thresholds: &[f64]) -> Result<Partition> {
    if beta_bar.is_empty() {
        return Err(Error::Shape("no rates to partition".into()));
    }
    if beta_bar.iter().any(|b| !b.is_finite()) {
        return Err(Error::Domain("rates must be finite on the truncation".into()));
    }
    let m = beta_bar.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut bounds: Vec<f64> = thresholds.iter().copied().filter(|t| *t != f64::NEG_INFINITY).collect();
    if bounds.iter().any(|t| t.is_nan() || *t == f64::INFINITY) {
        return Err(Error::Domain("thresholds must be finite".into()));
    }
    if bounds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("thresholds must be strictly increasing".into()));
    }
    match bounds.last().copied() {
        None => bounds.push(m),
        Some(last) if last < m => {
            return Err(Error::Domain(format!("last threshold {last} is below max rate {m}")));
        }
        Some(last) if last > m => {
            // Classes above M are empty; cap the top boundary at M.
            bounds.retain(|t| *t < m);
            bounds.push(m);
        }
        Some(_) => {}
    }
    let mut classes = vec![Vec::new(); bounds.len()];
    for (j, b) in beta_bar.iter().enumerate() {
        let k = bounds.partition_point(|t| t < b);
        classes[k].push(j);
    }
    let (thresholds, classes): (Vec<f64>, Vec<Vec<usize>>) =
        bounds.into_iter().zip(classes).filter(|(_, c)| !c.is_empty()).unzip();
    if classes.len() > MAX_CLASSES {
        return Err(Error::Domain(format!("{} classes exceeds the limit of {MAX_CLASSES}", classes.len())));
    }
    Ok(Partition { thresholds, classes })
}

/// Aggregates the generator over `grid`: off-diagonal entries take the sup
/// of the class-to-class exit mass below the diagonal and the inf above it.
pub fn aggregate_generator(
    gen: &SwitchingGenerator,
    partition: &Partition,
    beta_bar: &[f64],
    grid: &[Vec<f64>],
    rate_cap: f64,
) -> Result<PartitionAggregate> {
    let n = gen.num_regimes();
    if beta_bar.len() != n {
        return Err(Error::Shape(format!("{n} regimes but {} rates", beta_bar.len())));
    }
    if grid.is_empty() {
        return Err(Error::Domain("empty sample grid".into()));
    }
    let class_of = partition.class_of(n);
    if let Some(j) = class_of.iter().position(|c| *c == usize::MAX) {
        return Err(Error::Validation(format!("regime {j} is not in any class")));
    }
    let m = partition.len();
    let mut q_f = vec![vec![f64::NAN; m]; m];
    let mut row = Vec::new();
    let mut sums = vec![0.0; m];
    let mut max_exit: f64 = 0.0;
    for x in grid {
        for r in 0..n {
            gen.row_into(x, r, &mut row);
            sums.iter_mut().for_each(|s| *s = 0.0);
            let mut exit = 0.0;
            for &(j, q) in &row {
                if !q.is_finite() {
                    return Err(Error::Evaluator { x: x.clone(), i: r, j: Some(j), reason: "non-finite rate".into() });
                }
                sums[class_of[j]] += q;
                exit += q;
            }
            if exit > rate_cap {
                return Err(Error::Validation(format!(
                    "exit rate {exit:e} of regime {r} at x = {x:?} exceeds the cap {rate_cap:e}; rates must stay bounded"
                )));
            }
            max_exit = max_exit.max(exit);
            let i = class_of[r];
            for k in 0..m {
                if k == i {
                    continue;
                }
                let cur = &mut q_f[i][k];
                *cur = if cur.is_nan() {
                    sums[k]
                } else if k < i {
                    cur.max(sums[k])
                } else {
                    cur.min(sums[k])
                };
            }
        }
    }
    for (i, row) in q_f.iter_mut().enumerate() {
        row[i] = 0.0;
        let off: f64 = row.iter().sum();
        row[i] = -off;
    }
    let beta_f = partition
        .classes
        .iter()
        .map(|c| c.iter().map(|&j| beta_bar[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let h = (0..m).map(|i| (0..m).map(|j| if j >= i { 1.0 } else { 0.0 }).collect()).collect();
    Ok(PartitionAggregate {
        partition: partition.clone(),
        beta_f,
        q_f,
        h,
        grid_points: grid.len(),
        max_exit_rate: max_exit,
    })
}

/// `A = -(diag β^F + Q^F) H`.
pub fn partition_matrix(agg: &PartitionAggregate) -> DMatrix<f64> {
    let m = agg.beta_f.len();
    let b = DMatrix::from_fn(m, m, |i, j| -agg.q_f[i][j] - if i == j { agg.beta_f[i] } else { 0.0 });
    let h = DMatrix::from_fn(m, m, |i, j| agg.h[i][j]);
    b * h
}

/// Explains a disagreement between the minor test and the semipositivity test.
pub fn mode_divergence_note(minors_accept: bool) -> String {
    if minors_accept {
        "documented discrepancy: the leading principal minors of A are positive, but A is not a Z-matrix and \
         admits no η ≫ 0 with Aη ≫ 0, so the semipositivity test the criterion rests on rejects"
            .to_string()
    } else {
        "documented discrepancy: A is semipositive although a leading principal minor is not positive".to_string()
    }
}

/// Finite-partition criterion: tests `A = -(diag β^F + Q^F) H` in `mode`
/// and records whether the other test agrees.
pub fn verdict_partition(agg: &PartitionAggregate, rho: &TestFunctionSpec, mode: MMatrixMode) -> Result<Verdict> {
    let theorem = Criterion::Partition;
    let a = partition_matrix(agg);
    let matrix: Vec<Vec<f64>> = a.row_iter().map(|r| r.iter().copied().collect()).collect();
    let outcome = match is_nonsingular_m_matrix(&a, mode) {
        Err(Error::ModeMismatch) => {
            let cert = PartitionCertificate { aggregate: agg.clone(), matrix, mmatrix: None };
            let mut v = Verdict::new(crate::VerdictKind::Inconclusive, theorem, Some(Certificate::Partition(cert)))
                .with_mode(mode)
                .with_note("aggregated matrix is not a Z-matrix; the Z-matrix minor test does not apply");
            v.notes.push("use the semipositivity or leading-minors-only mode".into());
            return Ok(v);
        }
        other => other?,
    };
    let minors_accept = match mode {
        MMatrixMode::Semipositivity => is_nonsingular_m_matrix(&a, MMatrixMode::LeadingMinorsOnly)?.accepted(),
        _ => outcome.accepted(),
    };
    let semi_accept = match mode {
        MMatrixMode::Semipositivity => outcome.accepted(),
        _ => is_nonsingular_m_matrix(&a, MMatrixMode::Semipositivity)?.accepted(),
    };
    let mut notes = vec![format!("{} classes; thresholds {:?}", agg.partition.len(), agg.partition.thresholds)];
    if minors_accept != semi_accept {
        notes.push(mode_divergence_note(minors_accept));
    }
    let (kind, mmatrix) = match outcome {
        MMatrixOutcome::Accepted(cert) => (stability_kind(rho), Some(cert)),
        MMatrixOutcome::Rejected(rej) => {
            notes.push(rej.reason);
            (crate::VerdictKind::Inconclusive, None)
        }
    };
    let cert = PartitionCertificate { aggregate: agg.clone(), matrix, mmatrix };
    let mut v = Verdict::new(kind, theorem, Some(Certificate::Partition(cert))).with_mode(mode);
    v.notes = notes;
    Ok(v)
}
