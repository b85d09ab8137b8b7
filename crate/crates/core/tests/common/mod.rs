#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense irreducible generator with every off-diagonal rate in `[0.1, 3)`.
pub fn random_generator(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut total = 0.0;
        for j in 0..n {
            if i != j {
                let r = rng.random_range(0.1..3.0);
                q[(i, j)] = r;
                total += r;
            }
        }
        q[(i, i)] = -total;
    }
    q
}

/// Generator reversible for a random `π`: `q_ij = s_ij / π_i` with `s`
/// symmetric. A spanning path keeps it irreducible; other edges are sparse.
pub fn random_reversible(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    let total: f64 = w.iter().sum();
    let pi: Vec<f64> = w.iter().map(|v| v / total).collect();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || rng.random_bool(0.4) {
                let v = rng.random_range(0.05..1.0);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
    }
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            if i != j {
                q[(i, j)] = s[(i, j)] / pi[i];
                row += q[(i, j)];
            }
        }
        q[(i, i)] = -row;
    }
    (pi, q)
}

pub fn birth_death_matrix(birth: &[f64], death: &[f64]) -> DMatrix<f64> {
    let n = birth.len();
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        if i + 1 < n {
            q[(i, i + 1)] = birth[i];
        }
        if i > 0 {
            q[(i, i - 1)] = death[i];
        }
        q[(i, i)] = -(q.row(i).sum());
    }
    q
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
