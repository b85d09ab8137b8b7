use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Jump-rate evaluator `q_ij(x)` for the switching component.
pub trait RateField: Send + Sync + fmt::Debug {
    fn num_regimes(&self) -> usize;

    fn state_dependent(&self) -> bool;

    /// Appends the off-diagonal rates out of `i` at `x` as `(j, q_ij(x))`
    /// with `j` ascending. Entries that are identically zero may be skipped.
    fn row(&self, x: &[f64], i: usize, out: &mut Vec<(usize, f64)>);

    /// An explicitly declared diagonal entry, if the source carries one.
    /// When `None` the diagonal is `-Σ_{j≠i} q_ij(x)` by definition.
    fn declared_diagonal(&self, _x: &[f64], _i: usize) -> Option<f64> {
        None
    }
}

/// Constant dense `Q`. The stored diagonal is kept for validation.
#[derive(Debug, Clone)]
struct DenseRates {
    q: DMatrix<f64>,
}

impl RateField for DenseRates {
    fn num_regimes(&self) -> usize {
        self.q.nrows()
    }

    fn state_dependent(&self) -> bool {
        false
    }

    fn row(&self, _x: &[f64], i: usize, out: &mut Vec<(usize, f64)>) {
        for j in 0..self.q.ncols() {
            if j != i && self.q[(i, j)] != 0.0 {
                out.push((j, self.q[(i, j)]));
            }
        }
    }

    fn declared_diagonal(&self, _x: &[f64], i: usize) -> Option<f64> {
        Some(self.q[(i, i)])
    }
}

/// Constant birth-death rates on `{0, ..., n-1}`; the birth rate out of the
/// last state is dropped (reflecting truncation).
#[derive(Debug, Clone)]
struct BirthDeathRates {
    birth: Vec<f64>,
    death: Vec<f64>,
}

impl RateField for BirthDeathRates {
    fn num_regimes(&self) -> usize {
        self.birth.len()
    }

    fn state_dependent(&self) -> bool {
        false
    }

    fn row(&self, _x: &[f64], i: usize, out: &mut Vec<(usize, f64)>) {
        if i > 0 {
            out.push((i - 1, self.death[i]));
        }
        if i + 1 < self.birth.len() {
            out.push((i + 1, self.birth[i]));
        }
    }
}

/// Birth-death rates perturbed by `sin x₁`: with 1-based labels `k = i + 1`,
/// `q_{k,k+1}(x) = c_k + (k-1) sin x₁` and `q_{k,k-1}(x) = a_k + (k-2) sin x₁`.
#[derive(Debug, Clone)]
struct SinePerturbedBirthDeath {
    birth: Vec<f64>,
    death: Vec<f64>,
}

impl RateField for SinePerturbedBirthDeath {
    fn num_regimes(&self) -> usize {
        self.birth.len()
    }

    fn state_dependent(&self) -> bool {
        true
    }

    fn row(&self, x: &[f64], i: usize, out: &mut Vec<(usize, f64)>) {
        let s = x[0].sin();
        if i > 0 {
            out.push((i - 1, self.death[i] + (i as f64 - 1.0) * s));
        }
        if i + 1 < self.birth.len() {
            out.push((i + 1, self.birth[i] + i as f64 * s));
        }
    }
}

struct FnRates<F> {
    n: usize,
    state_dependent: bool,
    f: F,
}

impl<F> fmt::Debug for FnRates<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnRates").field("n", &self.n).finish()
    }
}

impl<F> RateField for FnRates<F>
where
    F: Fn(&[f64], usize, usize) -> f64 + Send + Sync,
{
    fn num_regimes(&self) -> usize {
        self.n
    }

    fn state_dependent(&self) -> bool {
        self.state_dependent
    }

    fn row(&self, x: &[f64], i: usize, out: &mut Vec<(usize, f64)>) {
        for j in 0..self.n {
            if j != i {
                out.push((j, (self.f)(x, i, j)));
            }
        }
    }
}

/// The switching generator `Q_x = (q_ij(x))`.
#[derive(Debug, Clone)]
pub struct SwitchingGenerator {
    field: Arc<dyn RateField>,
}

impl SwitchingGenerator {
    pub fn new(field: Arc<dyn RateField>) -> Self {
        Self { field }
    }

    /// Constant generator from a dense square matrix (diagonal kept as given).
    pub fn dense(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() == 0 {
            return Err(Error::Shape(format!("generator must be square, got {}x{}", q.nrows(), q.ncols())));
        }
        Ok(Self::new(Arc::new(DenseRates { q })))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("generator rows must all have length equal to the row count".into()));
        }
        Self::dense(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Constant birth-death generator; `birth[i]` is the rate `i → i+1`,
    /// `death[i]` the rate `i → i-1` (`death[0]` is ignored).
    pub fn birth_death(birth: Vec<f64>, death: Vec<f64>) -> Result<Self> {
        if birth.len() != death.len() || birth.len() < 2 {
            return Err(Error::Shape("birth and death rates need equal length >= 2".into()));
        }
        Ok(Self::new(Arc::new(BirthDeathRates { birth, death })))
    }

    /// State-dependent birth-death chain with `sin x₁` perturbations:
    /// `q_{i,i+1}(x) = birth[i] + i sin x₁` and `q_{i,i-1}(x) = death[i] + (i-1) sin x₁`.
    pub fn sine_perturbed_birth_death(birth: Vec<f64>, death: Vec<f64>) -> Result<Self> {
        if birth.len() != death.len() || birth.len() < 2 {
            return Err(Error::Shape("birth and death rates need equal length >= 2".into()));
        }
        Ok(Self::new(Arc::new(SinePerturbedBirthDeath { birth, death })))
    }

    /// Generator from an arbitrary off-diagonal rate function `(x, i, j) ↦ q_ij(x)`.
    pub fn from_fn<F>(n: usize, state_dependent: bool, f: F) -> Self
    where
        F: Fn(&[f64], usize, usize) -> f64 + Send + Sync + 'static,
    {
        Self::new(Arc::new(FnRates { n, state_dependent, f }))
    }

    pub fn num_regimes(&self) -> usize {
        self.field.num_regimes()
    }

    pub fn is_state_dependent(&self) -> bool {
        self.field.state_dependent()
    }

    pub fn row_into(&self, x: &[f64], i: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        self.field.row(x, i, out);
    }

    pub fn row(&self, x: &[f64], i: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.row_into(x, i, &mut out);
        out
    }

    pub fn rate(&self, x: &[f64], i: usize, j: usize) -> f64 {
        if i == j {
            return -self.exit_rate(x, i);
        }
        self.row(x, i).into_iter().find(|(k, _)| *k == j).map_or(0.0, |(_, q)| q)
    }

    /// `q_i(x) = Σ_{j≠i} q_ij(x)`.
    pub fn exit_rate(&self, x: &[f64], i: usize) -> f64 {
        self.row(x, i).iter().map(|(_, q)| q).sum()
    }

    /// The full matrix at `x`, with the derived diagonal `-q_i(x)`.
    pub fn matrix_at(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.num_regimes();
        let mut q = DMatrix::zeros(n, n);
        let mut row = Vec::new();
        for i in 0..n {
            self.row_into(x, i, &mut row);
            let mut total = 0.0;
            for &(j, r) in &row {
                q[(i, j)] += r;
                total += r;
            }
            q[(i, i)] = -total;
        }
        q
    }

    /// The matrix of a state-independent generator.
    pub fn constant_matrix(&self) -> Result<DMatrix<f64>> {
        if self.is_state_dependent() {
            return Err(Error::NotApplicable("generator is state-dependent".into()));
        }
        Ok(self.matrix_at(&[0.0]))
    }

    pub(crate) fn declared_diagonal(&self, x: &[f64], i: usize) -> Option<f64> {
        self.field.declared_diagonal(x, i)
    }
}

/// Whether the directed graph `i → j` for `q_ij > 0` is strongly connected.
pub fn strongly_connected(q: &DMatrix<f64>) -> bool {
    let n = q.nrows();
    if n == 0 {
        return false;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let w = if forward { q[(u, v)] } else { q[(v, u)] };
                if v != u && w > 0.0 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Per-point outcome of [`validate_generator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    pub x: Vec<f64>,
    /// Largest `|Σ_j q_ij(x)|` over rows, using a declared diagonal when the
    /// source has one.
    pub max_row_defect: f64,
    /// `(i, j, q_ij(x))` with a negative off-diagonal rate.
    pub negative_rates: Vec<(usize, usize, f64)>,
    pub strongly_connected: bool,
}

impl PointCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_row_defect <= tol && self.negative_rates.is_empty() && self.strongly_connected
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub points: Vec<PointCheck>,
    pub passed: bool,
    pub truncated: bool,
}

impl ValidationReport {
    pub const ROW_SUM_TOL: f64 = 1e-12;

    /// One-line description of the first failing check.
    pub fn first_failure(&self) -> Option<String> {
        let p = self.points.iter().find(|p| !p.passed(Self::ROW_SUM_TOL))?;
        Some(if let Some(&(i, j, q)) = p.negative_rates.first() {
            format!("negative rate q[{i}][{j}] = {q} at x = {:?}", p.x)
        } else if p.max_row_defect > Self::ROW_SUM_TOL {
            format!("row sums deviate from 0 by {:e} at x = {:?}", p.max_row_defect, p.x)
        } else {
            format!("generator is not irreducible at x = {:?}", p.x)
        })
    }
}

/// Checks conservativeness, sign pattern and irreducibility at every sample
/// point. Results on countable spaces refer to the truncation.
pub fn validate_generator(gen: &SwitchingGenerator, sample_points: &[Vec<f64>]) -> Result<ValidationReport> {
    if sample_points.is_empty() {
        return Err(Error::Shape("validation needs at least one sample point".into()));
    }
    let n = gen.num_regimes();
    let mut points = Vec::with_capacity(sample_points.len());
    let mut row = Vec::new();
    for x in sample_points {
        let mut q = DMatrix::zeros(n, n);
        let mut negative_rates = Vec::new();
        let mut max_row_defect = 0.0f64;
        for i in 0..n {
            gen.row_into(x, i, &mut row);
            let mut off = 0.0;
            for &(j, r) in &row {
                if !r.is_finite() {
                    return Err(Error::Evaluator {
                        x: x.clone(),
                        i,
                        j: Some(j),
                        reason: format!("rate evaluated to {r}"),
                    });
                }
                if r < 0.0 {
                    negative_rates.push((i, j, r));
                }
                q[(i, j)] = r;
                off += r;
            }
            let defect = match gen.declared_diagonal(x, i) {
                Some(diag) => (diag + off).abs(),
                None => 0.0,
            };
            max_row_defect = max_row_defect.max(defect);
        }
        points.push(PointCheck {
            x: x.clone(),
            max_row_defect,
            negative_rates,
            strongly_connected: strongly_connected(&q),
        });
    }
    let passed = points.iter().all(|p| p.passed(ValidationReport::ROW_SUM_TOL));
    Ok(ValidationReport {
        points,
        passed,
        truncated: false,
    })
}

/// The origin plus points along each axis at several radii, including
/// `±π/2` and `±3π/2` where `sin` attains its extremes.
pub fn default_sample_points(dimension: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::FRAC_PI_2;
    let radii = [1e-3, 0.1, 0.5, 1.0, FRAC_PI_2, 2.0, 3.0 * FRAC_PI_2, 5.0, 10.0];
    let mut points = vec![vec![0.0; dimension]];
    for k in 0..dimension {
        for &r in &radii {
            for s in [1.0, -1.0] {
                let mut x = vec![0.0; dimension];
                x[k] = s * r;
                points.push(x);
            }
        }
    }
    points
}
