//! Analytics for the switching chain: invariant and reversing measures and
//! the interval construction that drives exact switching in simulation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::scenario::{strongly_connected, SwitchingGenerator};
use crate::{Error, Result};

/// Tolerance on `|Σ_j q_ij|` for a generator to count as conservative,
/// relative to the largest rate.
pub const CONSERVATIVE_TOL: f64 = 1e-12;
/// Largest admissible `‖μQ‖_∞` for a computed invariant measure.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;
/// Largest admissible detailed-balance defect `|π_i q_ij - π_j q_ji|`.
pub const DETAILED_BALANCE_TOL: f64 = 1e-10;

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("probability weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("probability weights sum to {total}, not 1")));
        }
        Ok(Self(weights))
    }

    /// Normalizes nonnegative weights with a positive total.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Numerical(format!("cannot normalize weights with total {total}")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(weights)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_generator(q: &DMatrix<f64>) -> Result<()> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(Error::Shape("generator must be square".into()));
    }
    if n < 2 {
        return Err(Error::Domain(format!("chain needs at least 2 states, got {n}")));
    }
    let scale = q.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in 0..n {
            if i != j && q[(i, j)] < 0.0 {
                return Err(Error::Validation(format!("negative rate q[{i}][{j}] = {}", q[(i, j)])));
            }
        }
        let defect = q.row(i).sum().abs();
        if defect > CONSERVATIVE_TOL * scale {
            return Err(Error::Validation(format!("row {i} sums to {defect:e}, generator is not conservative")));
        }
    }
    if !strongly_connected(q) {
        return Err(Error::Validation("generator is reducible".into()));
    }
    Ok(())
}

/// Invariant measure `μ` with `μQ = 0`, `Σμ = 1` of a constant, conservative,
/// irreducible generator.
///
/// Uses Grassmann–Taksar–Heyman elimination, which works only with the
/// nonnegative off-diagonal rates and never subtracts, so small
/// probabilities keep their relative accuracy.
pub fn stationary_distribution(q: &DMatrix<f64>) -> Result<ProbabilityVector> {
    check_generator(q)?;
    let n = q.nrows();
    let mut a = q.clone();
    for i in 0..n {
        a[(i, i)] = 0.0;
    }
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if !(s > 0.0) {
            return Err(Error::Numerical("elimination met a state with no exit to lower states".into()));
        }
        for i in 0..k {
            a[(i, k)] /= s;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                if i != j {
                    a[(i, j)] += aik * a[(k, j)];
                }
            }
        }
    }
    let mut mu = vec![0.0; n];
    mu[0] = 1.0;
    for k in 1..n {
        mu[k] = (0..k).map(|i| mu[i] * a[(i, k)]).sum();
    }
    let mu = ProbabilityVector::normalized(mu)?;
    let residual = stationary_residual(q, mu.as_slice());
    if residual > STATIONARY_RESIDUAL_TOL {
        return Err(Error::Numerical(format!("invariant measure residual {residual:e} exceeds tolerance")));
    }
    Ok(mu)
}

/// `‖μQ‖_∞`.
pub fn stationary_residual(q: &DMatrix<f64>, mu: &[f64]) -> f64 {
    let n = q.nrows();
    (0..n)
        .map(|j| (0..n).map(|i| mu[i] * q[(i, j)]).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

/// Outcome of [`reversing_measure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reversibility {
    Reversible(ProbabilityVector),
    /// Detailed balance fails on the pair `(i, j)`.
    NotReversible { i: usize, j: usize, defect: f64 },
}

impl Reversibility {
    pub fn measure(&self) -> Option<&ProbabilityVector> {
        match self {
            Self::Reversible(pi) => Some(pi),
            Self::NotReversible { .. } => None,
        }
    }
}

fn is_tridiagonal(q: &DMatrix<f64>) -> bool {
    let n = q.nrows();
    (0..n).all(|i| (0..n).all(|j| i.abs_diff(j) <= 1 || q[(i, j)] == 0.0))
}

/// The measure `π` with `π_i q_ij = π_j q_ji`, if one exists.
///
/// Birth-death generators use the recursion `π_{i+1} = π_i q_{i,i+1} / q_{i+1,i}`;
/// other generators compute `μ` and test detailed balance on it.
pub fn reversing_measure(q: &DMatrix<f64>) -> Result<Reversibility> {
    check_generator(q)?;
    let n = q.nrows();
    if is_tridiagonal(q) {
        let mut pi = vec![1.0; n];
        for i in 0..n - 1 {
            let up = q[(i, i + 1)];
            let down = q[(i + 1, i)];
            if down == 0.0 {
                return Ok(Reversibility::NotReversible { i, j: i + 1, defect: up });
            }
            pi[i + 1] = pi[i] * up / down;
        }
        return Ok(Reversibility::Reversible(ProbabilityVector::normalized(pi)?));
    }
    let mu = stationary_distribution(q)?;
    if let Some((i, j, defect)) = worst_balance_defect(q, mu.as_slice()) {
        return Ok(Reversibility::NotReversible { i, j, defect });
    }
    Ok(Reversibility::Reversible(mu))
}

/// The worst pair violating detailed balance beyond [`DETAILED_BALANCE_TOL`].
pub fn worst_balance_defect(q: &DMatrix<f64>, pi: &[f64]) -> Option<(usize, usize, f64)> {
    let n = q.nrows();
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let defect = (pi[i] * q[(i, j)] - pi[j] * q[(j, i)]).abs();
            if defect > DETAILED_BALANCE_TOL && worst.map_or(true, |w| defect > w.2) {
                worst = Some((i, j, defect));
            }
        }
    }
    worst
}

/// Consecutive half-open intervals `Δ_ij(x) = [left, right)` of length
/// `q_ij(x)` out of a fixed regime `i`, ordered by target `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTable {
    pub from: usize,
    /// `(j, left, right)`; zero-length intervals are omitted.
    pub intervals: Vec<(usize, f64, f64)>,
}

impl IntervalTable {
    pub fn from_row(from: usize, row: &[(usize, f64)]) -> Self {
        let mut intervals = Vec::with_capacity(row.len());
        let mut left = 0.0;
        for &(j, rate) in row {
            if rate > 0.0 {
                let right = left + rate;
                intervals.push((j, left, right));
                left = right;
            }
        }
        Self { from, intervals }
    }

    /// Total length `q_i(x)`.
    pub fn total(&self) -> f64 {
        self.intervals.last().map_or(0.0, |iv| iv.2)
    }

    /// The target whose interval contains `z`, if any.
    pub fn locate(&self, z: f64) -> Option<usize> {
        if !(z >= 0.0) || z >= self.total() {
            return None;
        }
        let k = self.intervals.partition_point(|iv| iv.2 <= z);
        self.intervals.get(k).map(|iv| iv.0)
    }

    /// The jump mark `h(x, i, z) = Σ_j (j - i) 1_{Δ_ij(x)}(z)`.
    pub fn jump(&self, z: f64) -> i64 {
        self.locate(z).map_or(0, |j| j as i64 - self.from as i64)
    }
}

pub fn poisson_intervals(gen: &SwitchingGenerator, x: &[f64], i: usize) -> IntervalTable {
    IntervalTable::from_row(i, &gen.row(x, i))
}

/// Next regime for a uniform variate `u ∈ [0, q_i(x))`.
pub fn sample_next_regime(gen: &SwitchingGenerator, x: &[f64], i: usize, u: f64) -> Result<usize> {
    let table = poisson_intervals(gen, x, i);
    let total = table.total();
    if !(total > 0.0) {
        return Err(Error::Contract(format!("regime {i} has no exit rate at x = {x:?}")));
    }
    table
        .locate(u)
        .ok_or_else(|| Error::Contract(format!("variate {u} outside [0, {total})")))
}
