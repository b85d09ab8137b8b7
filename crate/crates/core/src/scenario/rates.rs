use serde::{Deserialize, Serialize};

use super::model::ScenarioModel;
use super::test_function::{apply_generator_l, TestFunctionSpec};
use crate::geometry::{geometric_radii, SphereGrid};
use crate::{Error, Result};

/// Which rate inequality the vector certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateMode {
    /// `L^{(i)}ρ ≤ β_i h` near 0 with a companion `h`, `h/ρ → 0`, `L^{(i)}h/h → 0`.
    #[serde(rename = "a1")]
    CompanionNearZero,
    /// `L^{(i)}ρ ≤ β̄_i ρ` near 0.
    #[serde(rename = "a2")]
    RelativeNearZero,
    /// `L^{(i)}ρ ≤ γ_i ρ` near 0 with `γ ≢ 0`.
    #[serde(rename = "a3")]
    SpectralNearZero,
    /// `L^{(i)}ρ ≤ γ_i ρ` for `|x| ≥ r₀` with `γ ≢ 0`.
    #[serde(rename = "a4")]
    SpectralAtInfinity,
}

impl RateMode {
    pub fn default_annulus(self) -> Annulus {
        match self {
            Self::SpectralAtInfinity => Annulus { inner: 1.0, outer: 1e3 },
            _ => Annulus { inner: 1e-4, outer: 1e-1 },
        }
    }

    fn requires_nonzero(self) -> bool {
        matches!(self, Self::SpectralNearZero | Self::SpectralAtInfinity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub inner: f64,
    pub outer: f64,
}

/// Companion `h(x) = scale · |x|^power` for [`RateMode::CompanionNearZero`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Companion {
    pub power: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Companion {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.scale * crate::geometry::norm(x).powf(self.power)
    }
}

/// Resolution of the grid used for numerical rate extraction: geometric
/// radii times a sphere grid of directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radial_points: usize,
    /// Ignored for `d = 1`, where the sphere is `{-1, +1}`.
    pub directions: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            radial_points: 65,
            directions: 720,
        }
    }
}

impl GridSpec {
    /// A grid containing every point of `self`, `factor` times denser in
    /// each coordinate (nested for `d ≤ 2`).
    pub fn refine(self, factor: usize) -> Self {
        Self {
            radial_points: (self.radial_points - 1) * factor + 1,
            directions: self.directions * factor,
        }
    }

    pub fn points(&self, dimension: usize, annulus: Annulus) -> Vec<Vec<f64>> {
        let sphere = SphereGrid::with_directions(dimension, self.directions);
        let radii = geometric_radii(annulus.inner, annulus.outer, self.radial_points);
        let mut pts = Vec::with_capacity(radii.len() * sphere.len());
        for &r in &radii {
            for theta in sphere.iter() {
                pts.push(theta.iter().map(|t| r * t).collect());
            }
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateProvenance {
    Declared,
    NumericallyEstimated(GridSpec),
}

/// Per-regime rates attached to a test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateVector {
    pub mode: RateMode,
    pub rates: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub companion: Option<Companion>,
    pub annulus: Annulus,
    pub provenance: RateProvenance,
}

impl RateVector {
    /// User-declared rates; trusted as given.
    pub fn declared(mode: RateMode, rates: Vec<f64>, companion: Option<Companion>, annulus: Option<Annulus>) -> Result<Self> {
        if rates.iter().any(|r| !r.is_finite()) {
            return Err(Error::Domain("declared rates must be finite".into()));
        }
        if mode.requires_nonzero() && rates.iter().all(|r| *r == 0.0) {
            return Err(Error::Validation("rates must not vanish identically in this mode".into()));
        }
        if mode == RateMode::CompanionNearZero && companion.is_none() {
            return Err(Error::Domain("companion-bound rates need a companion function".into()));
        }
        Ok(Self {
            mode,
            rates,
            companion,
            annulus: annulus.unwrap_or_else(|| mode.default_annulus()),
            provenance: RateProvenance::Declared,
        })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

/// Grid estimate of the smallest admissible rates: for each regime the
/// maximum over grid points of `L^{(i)}ρ/ρ`, or `L^{(i)}ρ/h` in companion mode.
///
/// The result is an upper bound only over the grid points used.
pub fn extract_rates(
    model: &ScenarioModel,
    rho: &TestFunctionSpec,
    mode: RateMode,
    annulus: Annulus,
    grid: GridSpec,
    companion: Option<Companion>,
) -> Result<RateVector> {
    if !(annulus.inner > 0.0 && annulus.inner < annulus.outer && annulus.outer.is_finite()) {
        return Err(Error::Domain(format!(
            "annulus needs 0 < inner < outer < ∞, got [{}, {}]",
            annulus.inner, annulus.outer
        )));
    }
    if mode == RateMode::CompanionNearZero && companion.is_none() {
        return Err(Error::Domain("companion-bound rates need a companion function".into()));
    }
    if grid.radial_points == 0 || grid.directions == 0 {
        return Err(Error::Shape("rate grid is empty".into()));
    }
    let points = grid.points(model.dimension, annulus);
    if points.is_empty() {
        return Err(Error::Shape("rate grid is empty".into()));
    }
    let mut rates = vec![f64::NEG_INFINITY; model.num_regimes()];
    for x in &points {
        let denom = match companion {
            Some(h) if mode == RateMode::CompanionNearZero => h.value(x),
            _ => rho.value(x),
        };
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Domain(format!("rate denominator is {denom} at grid point {x:?}")));
        }
        for (i, rate) in rates.iter_mut().enumerate() {
            let q = apply_generator_l(model, rho, x, i)? / denom;
            if q > *rate {
                *rate = q;
            }
        }
    }
    if mode.requires_nonzero() && rates.iter().all(|r| *r == 0.0) {
        return Err(Error::Validation("estimated rates vanish identically; this mode needs γ ≢ 0".into()));
    }
    Ok(RateVector {
        mode,
        rates,
        companion: if mode == RateMode::CompanionNearZero { companion } else { None },
        annulus,
        provenance: RateProvenance::NumericallyEstimated(grid),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::scenario::{ConstantDiffusion, LinearDrift, PowerClippedDiffusion, PowerClippedDrift, RegimeSpace, SwitchingGenerator, ZeroField};

    fn two_state() -> SwitchingGenerator {
        SwitchingGenerator::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap()
    }

    #[test]
    fn linear_drift_rates_are_exact_at_infinity() {
        let m = ScenarioModel::new(
            1,
            RegimeSpace::Finite(2),
            Arc::new(LinearDrift { coef: vec![-2.0, 1.0] }),
            Arc::new(ConstantDiffusion { coef: vec![1.0, 1.0], dimension: 1 }),
            two_state(),
        )
        .unwrap();
        let rho = TestFunctionSpec::power(1.0).unwrap();
        let mode = RateMode::SpectralAtInfinity;
        let rv = extract_rates(&m, &rho, mode, Annulus { inner: 1.0, outer: 100.0 }, GridSpec::default(), None).unwrap();
        assert!((rv.rates[0] + 2.0).abs() < 1e-12);
        assert!((rv.rates[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_model_rejected_for_spectral_modes() {
        let m = ScenarioModel::new(1, RegimeSpace::Finite(2), Arc::new(ZeroField), Arc::new(ZeroField), two_state()).unwrap();
        let rho = TestFunctionSpec::power(1.0).unwrap();
        let grid = GridSpec::default();
        let ann = RateMode::SpectralNearZero.default_annulus();
        let rv = extract_rates(&m, &rho, RateMode::RelativeNearZero, ann, grid, None).unwrap();
        assert_eq!(rv.rates, vec![0.0, 0.0]);
        assert!(matches!(
            extract_rates(&m, &rho, RateMode::SpectralNearZero, ann, grid, None),
            Err(Error::Validation(_))
        ));
        assert!(extract_rates(&m, &rho, RateMode::SpectralAtInfinity, ann, grid, None).is_err());
    }

    #[test]
    fn power_clipped_rate_approaches_drift_coefficient() {
        // L|x| = b sgn(x) x² for |x| < 1, so L|x| / |x| = b|x| ≤ b · r_outer.
        let b = [1.5, -0.7];
        let m = ScenarioModel::new(
            1,
            RegimeSpace::Finite(2),
            Arc::new(PowerClippedDrift { coef: b.to_vec(), exponent: 2.0 }),
            Arc::new(PowerClippedDiffusion { coef: vec![1.0, 1.0], exponent: 2.0, dimension: 1 }),
            two_state(),
        )
        .unwrap();
        let rho = TestFunctionSpec::power(1.0).unwrap();
        let ann = Annulus { inner: 1e-4, outer: 1e-2 };
        let rv = extract_rates(&m, &rho, RateMode::RelativeNearZero, ann, GridSpec::default(), None).unwrap();
        assert!((rv.rates[0] - b[0] * 1e-2).abs() < 1e-14);
        assert!((rv.rates[1] - b[1] * 1e-4).abs() < 1e-14);
    }

    #[test]
    fn companion_mode_recovers_drift_coefficient() {
        let b = [1.5, -0.7];
        let m = ScenarioModel::new(
            1,
            RegimeSpace::Finite(2),
            Arc::new(PowerClippedDrift { coef: b.to_vec(), exponent: 2.0 }),
            Arc::new(PowerClippedDiffusion { coef: vec![1.0, 1.0], exponent: 2.0, dimension: 1 }),
            two_state(),
        )
        .unwrap();
        let rho = TestFunctionSpec::power(1.0).unwrap();
        let h = Companion { power: 2.0, scale: 1.0 };
        let ann = Annulus { inner: 1e-4, outer: 1e-2 };
        let rv = extract_rates(&m, &rho, RateMode::CompanionNearZero, ann, GridSpec::default(), Some(h)).unwrap();
        assert!((rv.rates[0] - b[0]).abs() < 1e-12);
        assert!((rv.rates[1] - b[1]).abs() < 1e-12);
        assert_eq!(rv.companion, Some(h));
    }

    #[test]
    fn empty_grid_and_bad_annulus() {
        let m = ScenarioModel::new(1, RegimeSpace::Finite(2), Arc::new(ZeroField), Arc::new(ZeroField), two_state()).unwrap();
        let rho = TestFunctionSpec::power(1.0).unwrap();
        let grid = GridSpec { radial_points: 0, directions: 1 };
        assert!(matches!(
            extract_rates(&m, &rho, RateMode::RelativeNearZero, Annulus { inner: 0.1, outer: 1.0 }, grid, None),
            Err(Error::Shape(_))
        ));
        assert!(extract_rates(&m, &rho, RateMode::RelativeNearZero, Annulus { inner: 1.0, outer: 0.1 }, GridSpec::default(), None).is_err());
    }
}
