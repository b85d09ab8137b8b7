//! Browser bindings for a handful of interactive operations.
//!
//! Each export takes plain numbers and returns a JSON string, so the page
//! needs no glue beyond `JSON.parse`. The `*_json` functions are the same
//! operations without the wasm wrapper and are what the native tests call.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use switchcert::analysis::AnalysisOptions;
use switchcert::chain::stationary_distribution;
use switchcert::montecarlo::{simulate_path, SimConfig};
use switchcert::presets::{Preset, PresetId};
use switchcert::spectral::principal_eigenvalue;

/// Longest simulated horizon the page may request.
pub const MAX_HORIZON: f64 = 200.0;
pub const MAX_PATHS: usize = 64;
/// Points kept per path after thinning.
const PLOT_POINTS: usize = 400;

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Spectrum {
    lambda0: f64,
    g: Vec<f64>,
    residual: f64,
    mu: Vec<f64>,
    /// `Σ μ_i γ_i`; the principal eigenvalue never exceeds its negative.
    weighted_gamma: f64,
}

/// Principal eigenpair of `Ω = Q + diag(γ)` for a two-state chain
/// with switching rates `q01`, `q10`.
pub fn two_regime_spectrum_json(q01: f64, q10: f64, gamma0: f64, gamma1: f64) -> Result<String, String> {
    let q = DMatrix::from_row_slice(2, 2, &[-q01, q01, q10, -q10]);
    let gamma = [gamma0, gamma1];
    let cert = principal_eigenvalue(&q, &gamma, false).map_err(|e| e.to_string())?;
    let mu = stationary_distribution(&q).map_err(|e| e.to_string())?.into_inner();
    let weighted_gamma = mu.iter().zip(&gamma).map(|(m, g)| m * g).sum();
    to_json(&Spectrum { lambda0: cert.lambda0, g: cert.g, residual: cert.residual, mu, weighted_gamma })
}

/// Runs a named example with parameter overrides given as a JSON object
/// and returns the full analysis report.
pub fn reproduce_json(example: &str, params: &str) -> Result<String, String> {
    let id: PresetId = example.parse().map_err(|e: switchcert::Error| e.to_string())?;
    let overrides: BTreeMap<String, f64> = if params.trim().is_empty() {
        BTreeMap::new()
    } else {
        serde_json::from_str(params).map_err(|e| format!("parameters: {e}"))?
    };
    let report = Preset::build(id, &overrides, None)
        .and_then(|p| p.reproduce(&AnalysisOptions::default()))
        .map_err(|e| e.to_string())?;
    to_json(&report)
}

#[derive(Serialize)]
struct Paths {
    times: Vec<f64>,
    /// First coordinate of each path on the thinned grid.
    values: Vec<Vec<f64>>,
    regimes: Vec<Vec<usize>>,
}

/// Sample paths of the two-regime power-law system `dX = b_i X² dt`
/// with quadratic noise, thinned for plotting.
pub fn simulate_paths_json(b1: f64, b2: f64, x0: f64, horizon: f64, n_paths: usize, seed: u64) -> Result<String, String> {
    if !(horizon > 0.0 && horizon <= MAX_HORIZON) {
        return Err(format!("horizon must lie in (0, {MAX_HORIZON}]"));
    }
    if n_paths == 0 || n_paths > MAX_PATHS {
        return Err(format!("path count must lie in 1..={MAX_PATHS}"));
    }
    let overrides = BTreeMap::from([("b1".to_string(), b1), ("b2".to_string(), b2)]);
    let scenario = Preset::build(PresetId::PowerLaw, &overrides, None)
        .and_then(|p| p.file.build())
        .map_err(|e| e.to_string())?;
    let dt = (horizon / 20_000.0).min(1e-2);
    let config = SimConfig::new(dt, horizon, n_paths, seed);
    let stride = (config.steps() / PLOT_POINTS).max(1);
    let mut out = Paths { times: Vec::new(), values: Vec::new(), regimes: Vec::new() };
    for k in 0..n_paths as u64 {
        let path = simulate_path(&scenario.model, &[x0], 0, &config, k).map_err(|e| e.to_string())?;
        if out.times.is_empty() {
            out.times = path.times.iter().step_by(stride).copied().collect();
        }
        out.values.push(path.states.iter().step_by(stride).map(|x| x[0]).collect());
        out.regimes.push(path.regimes.iter().step_by(stride).copied().collect());
    }
    to_json(&out)
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn two_regime_spectrum(q01: f64, q10: f64, gamma0: f64, gamma1: f64) -> Result<String, JsError> {
    js(two_regime_spectrum_json(q01, q10, gamma0, gamma1))
}

#[wasm_bindgen]
pub fn reproduce(example: &str, params: &str) -> Result<String, JsError> {
    js(reproduce_json(example, params))
}

#[wasm_bindgen]
pub fn simulate_paths(b1: f64, b2: f64, x0: f64, horizon: f64, n_paths: usize, seed: u64) -> Result<String, JsError> {
    js(simulate_paths_json(b1, b2, x0, horizon, n_paths, seed))
}
