//! Small dense linear-algebra helpers shared by the certificate engines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Lower and upper bandwidth of `a` (largest `i - j`, resp. `j - i`, with a
/// nonzero entry).
pub fn bandwidths(a: &DMatrix<f64>) -> (usize, usize) {
    let (mut lower, mut upper) = (0, 0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != 0.0 {
                if i > j {
                    lower = lower.max(i - j);
                } else {
                    upper = upper.max(j - i);
                }
            }
        }
    }
    (lower, upper)
}

/// LU factorization without pivoting, restricted to the band of `a`.
///
/// Pivots are the ratios of consecutive leading principal minors, so the
/// factorization exists with all pivots positive exactly when every leading
/// principal minor is positive. For a Z-matrix this is the nonsingular
/// M-matrix property, and then the triangular solves involve no cancellation:
/// a positive right-hand side gives an entrywise positive solution.
#[derive(Debug, Clone)]
pub struct BandLu {
    lu: DMatrix<f64>,
    lower: usize,
    upper: usize,
}

impl BandLu {
    /// Factors `a`, stopping at the first pivot `<= threshold`. On failure
    /// returns the index of the offending pivot and the pivots computed so far.
    pub fn factor(a: &DMatrix<f64>, threshold: f64) -> std::result::Result<Self, (usize, Vec<f64>)> {
        let n = a.nrows();
        let (lower, upper) = bandwidths(a);
        let mut lu = a.clone();
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let pivot = lu[(k, k)];
            pivots.push(pivot);
            if !(pivot > threshold) {
                return Err((k, pivots));
            }
            let row_end = n.min(k + lower + 1);
            let col_end = n.min(k + upper + 1);
            for i in k + 1..row_end {
                let l = lu[(i, k)] / pivot;
                if l == 0.0 {
                    continue;
                }
                lu[(i, k)] = l;
                for j in k + 1..col_end {
                    let u = lu[(k, j)];
                    if u != 0.0 {
                        lu[(i, j)] -= l * u;
                    }
                }
            }
        }
        Ok(Self { lu, lower, upper })
    }

    pub fn pivots(&self) -> Vec<f64> {
        (0..self.lu.nrows()).map(|k| self.lu[(k, k)]).collect()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.lu.nrows();
        let mut y = rhs.to_vec();
        for i in 0..n {
            let start = i.saturating_sub(self.lower);
            let mut acc = y[i];
            for j in start..i {
                acc -= self.lu[(i, j)] * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let end = n.min(i + self.upper + 1);
            let mut acc = y[i];
            for j in i + 1..end {
                acc -= self.lu[(i, j)] * y[j];
            }
            y[i] = acc / self.lu[(i, i)];
        }
        y
    }
}

/// Leading principal minors of `a`, computed as running products of the
/// no-pivot LU pivots. The list stops at the first minor that is not
/// positive (it is included), since every later pivot is then undefined.
pub fn leading_minors(a: &DMatrix<f64>, tol: f64) -> Vec<f64> {
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let pivots = match BandLu::factor(a, tol * scale) {
        Ok(lu) => lu.pivots(),
        Err((_, pivots)) => pivots,
    };
    let mut minors = Vec::with_capacity(pivots.len());
    let mut running = 1.0;
    for p in pivots {
        running *= p;
        minors.push(running);
    }
    minors
}

/// Solves a square system with partial-pivoting LU.
pub fn lu_solve(a: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let b = DVector::from_column_slice(rhs);
    a.clone()
        .lu()
        .solve(&b)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::Numerical("singular linear system".into()))
}

/// Smallest eigenvalue of a symmetric matrix and a unit eigenvector for it.
pub fn symmetric_min_eigen(s: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(s.clone());
    let (k, lambda) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty matrix");
    (lambda, eig.eigenvectors.column(k).iter().copied().collect())
}

/// Pairwise (cascade) summation; order-independent of any scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (left, right) = values.split_at(n / 2);
            pairwise_sum(left) + pairwise_sum(right)
        }
    }
}

pub fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}
