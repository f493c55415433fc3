//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a flat `Float64Array` with a fixed row width so the page can
//! plot without parsing. The plain functions below the bindings hold the logic and
//! are what the native tests call.

use elfkit_core::bayes_engine::{b_chi_gaussian, vrf_noisy, GaussianPrior};
use elfkit_core::chebyshev_reference::{clf_vrf, ClfSpec};
use elfkit_core::elf_optimizer::{optimize, OptProblem};
use elfkit_core::harness::{bias_curve, mu_grid, BiasCurveConfig};
use elfkit_core::logical_circuit::{Scheme, TunableParams};
use elfkit_core::series_expansion::CoefficientPath;
use wasm_bindgen::prelude::*;

/// Optimizer budget for interactive use.
const DEMO_RESTARTS: usize = 4;
const DEMO_MAX_SWEEPS: usize = 100;
/// Largest L the page offers; keeps a full curve under a few seconds.
pub const DEMO_MAX_LAYERS: usize = 3;

fn parse_scheme(scheme: &str) -> Result<Scheme, String> {
    scheme.parse::<Scheme>().map_err(|e| e.to_string())
}

fn fidelity_arg(f: f64) -> Option<f64> {
    (f < 1.0).then_some(f)
}

fn check_layers(layers: usize) -> Result<(), String> {
    if layers == 0 || layers > DEMO_MAX_LAYERS {
        return Err(format!("L must be between 1 and {DEMO_MAX_LAYERS}"));
    }
    Ok(())
}

/// Rows of `[μ, V_clf, V_elf]` over `points` interior μ values; `fidelity` ≥ 1 means noiseless.
pub fn vrf_curve_rows(
    scheme: &str,
    layers: usize,
    sigma: f64,
    points: usize,
    fidelity: f64,
    seed: u32,
) -> Result<Vec<f64>, String> {
    let scheme = parse_scheme(scheme)?;
    check_layers(layers)?;
    let spec = ClfSpec::new(scheme, layers).map_err(|e| e.to_string())?;
    let f = fidelity_arg(fidelity);
    let mut out = Vec::with_capacity(3 * points);
    for (i, mu) in mu_grid(points).into_iter().enumerate() {
        let prior = GaussianPrior::new(mu, sigma).map_err(|e| e.to_string())?;
        let v_clf = match f {
            None => clf_vrf(&spec, mu, sigma),
            Some(f) => {
                let r = b_chi_gaussian(&spec.poly(), &prior);
                vrf_noisy(r.b, r.chi, f)
            }
        }
        .map_err(|e| e.to_string())?;
        let problem = OptProblem::new(scheme, layers, prior)
            .and_then(|p| p.with_fidelity(f))
            .map_err(|e| e.to_string())?
            .with_restarts(DEMO_RESTARTS)
            .with_max_sweeps(DEMO_MAX_SWEEPS)
            .with_seed(u64::from(seed) + i as u64);
        let r = optimize(&problem).map_err(|e| e.to_string())?;
        out.extend([mu, v_clf, r.v_star]);
    }
    Ok(out)
}

/// Rows of `[θ, Λ_circuit, Λ_series]` on [0, π] for the given angles (CLF angles when empty).
pub fn bias_curve_rows(
    scheme: &str,
    layers: usize,
    angles: &[f64],
    points: usize,
    fidelity: f64,
) -> Result<Vec<f64>, String> {
    let scheme = parse_scheme(scheme)?;
    let params = if angles.is_empty() {
        check_layers(layers)?;
        TunableParams::chebyshev(scheme, layers)
    } else {
        TunableParams::new(scheme, angles.to_vec())
    }
    .map_err(|e| e.to_string())?;
    let config = BiasCurveConfig {
        params,
        theta_points: points,
        fidelity: fidelity_arg(fidelity),
        path: CoefficientPath::Auto,
    };
    let curve = bias_curve(&config).map_err(|e| e.to_string())?;
    Ok(curve.rows.iter().flat_map(|r| [r.theta, r.direct, r.series]).collect())
}

/// `[V_elf, V_clf, gradient norm, x_1, …, x_2L]` at one (μ, σ).
pub fn optimize_point_values(scheme: &str, layers: usize, mu: f64, sigma: f64, seed: u32) -> Result<Vec<f64>, String> {
    let scheme = parse_scheme(scheme)?;
    check_layers(layers)?;
    let prior = GaussianPrior::new(mu, sigma).map_err(|e| e.to_string())?;
    let problem = OptProblem::new(scheme, layers, prior)
        .map_err(|e| e.to_string())?
        .with_restarts(DEMO_RESTARTS)
        .with_seed(u64::from(seed));
    let r = optimize(&problem).map_err(|e| e.to_string())?;
    let mut out = vec![r.v_star, r.v_clf, r.gradient_norm];
    out.extend_from_slice(r.x_star.angles());
    Ok(out)
}

#[wasm_bindgen]
pub fn vrf_curve(
    scheme: &str,
    layers: usize,
    sigma: f64,
    points: usize,
    fidelity: f64,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    vrf_curve_rows(scheme, layers, sigma, points, fidelity, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bias_curve_values(
    scheme: &str,
    layers: usize,
    angles: Vec<f64>,
    points: usize,
    fidelity: f64,
) -> Result<Vec<f64>, JsError> {
    bias_curve_rows(scheme, layers, &angles, points, fidelity).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn optimize_point(scheme: &str, layers: usize, mu: f64, sigma: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    optimize_point_values(scheme, layers, mu, sigma, seed).map_err(|e| JsError::new(&e))
}
