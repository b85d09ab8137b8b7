//! Deterministic direction grids on the unit sphere `S^{d-1}`.

use std::f64::consts::PI;

/// Default number of directions for `d = 2`.
pub const CIRCLE_DIRECTIONS: usize = 720;
/// Default number of Fibonacci-lattice directions for `d >= 3`.
pub const SPHERE_DIRECTIONS: usize = 10_000;

/// A finite set of unit vectors in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    dimension: usize,
    points: Vec<f64>,
}

impl SphereGrid {
    /// The documented default resolution: `{-1, +1}` for `d = 1`, 720 uniform
    /// angles for `d = 2`, a 10⁴-point Fibonacci lattice otherwise.
    pub fn default_for(dimension: usize) -> Self {
        match dimension {
            1 => Self::with_directions(1, 2),
            2 => Self::with_directions(2, CIRCLE_DIRECTIONS),
            d => Self::with_directions(d, SPHERE_DIRECTIONS),
        }
    }

    /// Builds a grid with `n` directions. For `d = 1` the grid is always the
    /// exact sphere `{-1, +1}` regardless of `n`.
    ///
    /// For `d = 2` the angles are `2πk/n`, so a grid with `n·m` directions
    /// contains the one with `n`.
    pub fn with_directions(dimension: usize, n: usize) -> Self {
        assert!(dimension >= 1, "dimension must be positive");
        let mut points = Vec::new();
        match dimension {
            1 => points.extend_from_slice(&[-1.0, 1.0]),
            2 => {
                let n = n.max(1);
                for k in 0..n {
                    let angle = 2.0 * PI * (k as f64 / n as f64);
                    points.push(angle.cos());
                    points.push(angle.sin());
                }
            }
            d => {
                let n = n.max(2);
                let golden = PI * (3.0 - 5f64.sqrt());
                for k in 0..n {
                    // Fibonacci lattice on S^2, padded with zeros in higher dimensions.
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * k as f64;
                    points.push(r * phi.cos());
                    points.push(r * phi.sin());
                    points.push(z);
                    points.extend(std::iter::repeat(0.0).take(d - 3));
                }
            }
        }
        Self { dimension, points }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dimension)
    }
}

/// `n` geometrically spaced radii from `inner` to `outer`, both included.
/// Refining `n - 1` intervals by an integer factor keeps every old radius.
pub fn geometric_radii(inner: f64, outer: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![inner];
    }
    let ratio = (outer / inner).ln();
    (0..n)
        .map(|k| {
            if k == n - 1 {
                outer
            } else {
                inner * (ratio * (k as f64 / (n - 1) as f64)).exp()
            }
        })
        .collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
