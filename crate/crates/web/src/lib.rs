//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns flat `f64` arrays (seen as `Float64Array` in JS) or
//! plain strings, so the page needs no glue beyond the generated module.

use nml_core::flows::{rotation_paths, RotationPaths};
use nml_core::harness::{quadratic_run, render_census, QuadraticRun};
use nml_core::net::ArchSpec;
use nml_core::oscillator::{homogeneous, OscillatorParams, Regime};
use wasm_bindgen::prelude::*;

const MAX_STEPS: usize = 10_000;

fn flatten(series: &[&[[f64; 2]]]) -> Vec<f64> {
    let n = series[0].len();
    let mut out = Vec::with_capacity(n * 2 * series.len());
    for k in 0..n {
        for s in series {
            out.extend_from_slice(&s[k]);
        }
    }
    out
}

fn check_steps(steps: usize) -> Result<(), String> {
    if steps == 0 || steps > MAX_STEPS {
        return Err(format!("steps must be in 1..={MAX_STEPS}, got {steps}"));
    }
    Ok(())
}

fn quadratic_inner(eta: f64, steps: usize, x0: f64, y0: f64) -> Result<QuadraticRun, String> {
    check_steps(steps)?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(format!("eta must be positive, got {eta}"));
    }
    quadratic_run(eta, steps, [x0, y0]).map_err(|e| e.to_string())
}

/// Gradient descent, gradient flow and modified-loss flow on the demo
/// quadratic. Six numbers per step: gd x/y, flow x/y, modified x/y.
#[wasm_bindgen]
pub fn quadratic(eta: f64, steps: usize, x0: f64, y0: f64) -> Result<Vec<f64>, JsError> {
    let run = quadratic_inner(eta, steps, x0, y0).map_err(|e| JsError::new(&e))?;
    Ok(flatten(&[&run.gd, &run.flow, &run.modified]))
}

/// Endpoint distances `[|gd - flow|, |gd - modified|]`.
#[wasm_bindgen]
pub fn quadratic_endpoint_errors(eta: f64, steps: usize, x0: f64, y0: f64) -> Result<Vec<f64>, JsError> {
    let (flow, modified) = quadratic_inner(eta, steps, x0, y0).map_err(|e| JsError::new(&e))?.endpoint_errors();
    Ok(vec![flow, modified])
}

/// Euler steps, exact flow and modified flow on the rotation field, six
/// numbers per step as in [`quadratic`].
#[wasm_bindgen]
pub fn rotation(eta: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    check_steps(steps).map_err(|e| JsError::new(&e))?;
    let RotationPaths { discrete, flow, modified } = rotation_paths(eta, steps);
    Ok(flatten(&[&discrete, &flow, &modified]))
}

fn oscillator_inner(gamma: f64, omega: f64, t_end: f64, samples: usize) -> Result<(Regime, Vec<f64>), String> {
    check_steps(samples)?;
    let p = OscillatorParams::new(gamma, omega).map_err(|e| e.to_string())?;
    let dt = t_end / samples as f64;
    Ok((p.regime(), (0..=samples).map(|k| homogeneous(p, 1.0, k as f64 * dt)).collect()))
}

/// `x(t)` of `x'' + 2γx' + ω²x = 0` from `x(0) = 1`, `x'(0) = 0` at
/// `samples + 1` evenly spaced times in `[0, t_end]`.
#[wasm_bindgen]
pub fn oscillator(gamma: f64, omega: f64, t_end: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    Ok(oscillator_inner(gamma, omega, t_end, samples).map_err(|e| JsError::new(&e))?.1)
}

#[wasm_bindgen]
pub fn oscillator_regime(gamma: f64, omega: f64) -> Result<String, JsError> {
    let (regime, _) = oscillator_inner(gamma, omega, 0.0, 1).map_err(|e| JsError::new(&e))?;
    Ok(format!("{regime:?}").to_lowercase())
}

fn census_inner(spec_json: &str) -> Result<String, String> {
    let spec = ArchSpec::from_json(spec_json).map_err(|e| e.to_string())?;
    Ok(render_census(&spec))
}

/// Symmetry census of an architecture given as JSON text.
#[wasm_bindgen]
pub fn census(spec_json: &str) -> Result<String, JsError> {
    census_inner(spec_json).map_err(|e| JsError::new(&e))
}

/// Bundled architecture specs by name: `vgg16`, `vgg16_bn`, `mlp_relu_bn`.
#[wasm_bindgen]
pub fn bundled_spec(name: &str) -> Option<String> {
    let text = match name {
        "vgg16" => include_str!("../../../specs/vgg16.json"),
        "vgg16_bn" => include_str!("../../../specs/vgg16_bn.json"),
        "mlp_relu_bn" => include_str!("../../../specs/mlp_relu_bn.json"),
        _ => return None,
    };
    Some(text.to_string())
}
