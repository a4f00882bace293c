//! Browser demo: switching curves, the write-mapping fit and write-time
//! current maps of a small transistor-less crossbar.
//!
//! The plain functions are what the tests exercise; the `wasm_bindgen`
//! wrappers only convert errors.

use mtj_xbar::crossbar::{solve_1r_network, Architecture, Crossbar};
use mtj_xbar::device::{switching_probability, DeviceParams, MtjState, SwitchDirection};
use mtj_xbar::rng::{stream, StreamKind};
use mtj_xbar::training::{map_error_to_pulse_width, map_input_to_current, schedule_phases, MappingCoefficients, PhaseMode};
use rand::Rng;
use wasm_bindgen::prelude::*;

fn direction(name: &str) -> Result<SwitchDirection, String> {
    match name {
        "ap2p" => Ok(SwitchDirection::ApToP),
        "p2ap" => Ok(SwitchDirection::PToAp),
        other => Err(format!("unknown direction `{other}`")),
    }
}

/// Switching probability against pulse width (0 to `t_max_ns`) at a fixed
/// current in microamperes.
pub fn switching_curve(dir: &str, current_ua: f64, t_max_ns: f64, points: usize) -> Result<Vec<f64>, String> {
    let dir = direction(dir)?;
    let params = DeviceParams::default();
    let steps = points.max(2) - 1;
    (0..=steps)
        .map(|k| {
            let t = t_max_ns * 1e-9 * k as f64 / steps as f64;
            switching_probability(current_ua * 1e-6, t, dir, &params).map_err(|e| e.to_string())
        })
        .collect()
}

/// Achieved switching probability on an `n x n` grid of `|x|` (rows) and
/// `|delta|` (columns), both from 0 to 1.
pub fn mapping_grid(dir: &str, n: usize) -> Result<Vec<f64>, String> {
    let dir = direction(dir)?;
    let params = DeviceParams::default();
    let coeff = MappingCoefficients::default();
    let steps = n.max(2) - 1;
    let mut out = Vec::with_capacity((steps + 1) * (steps + 1));
    for a in 0..=steps {
        let i = map_input_to_current(a as f64 / steps as f64, dir, &coeff).map_err(|e| e.to_string())?;
        for b in 0..=steps {
            let t = map_error_to_pulse_width(b as f64 / steps as f64, &coeff).map_err(|e| e.to_string())?;
            out.push(switching_probability(i, t, dir, &params).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

/// Largest gap between the grid and the ideal `eta |x| |delta|`.
pub fn mapping_max_error(dir: &str, n: usize, eta: f64) -> Result<f64, String> {
    let grid = mapping_grid(dir, n)?;
    let steps = n.max(2) - 1;
    let side = steps + 1;
    Ok(grid.iter().enumerate().fold(0.0f64, |m, (k, p)| {
        let (a, b) = ((k / side) as f64 / steps as f64, (k % side) as f64 / steps as f64);
        m.max((p - eta * a * b).abs())
    }))
}

/// Cell currents (microamperes, `j * rows + i`) in the first phase that
/// writes anything, for a random `rows x cols` 1R crossbar driven by random
/// inputs and errors under the two- or four-phase schedule.
pub fn sneak_currents(rows: usize, cols: usize, phases: u8, seed: u64) -> Result<Vec<f64>, String> {
    if rows == 0 || cols == 0 || rows * cols > 64 * 64 {
        return Err("crossbar must have between 1 and 4096 cells".into());
    }
    let mode = match phases {
        2 => PhaseMode::TwoPhase,
        4 => PhaseMode::FourPhase,
        other => return Err(format!("phases must be 2 or 4, got {other}")),
    };
    let params = DeviceParams::default();
    let mut rng = stream(seed, StreamKind::Init, 0);
    let xbar = Crossbar::fabricate(rows, cols, Architecture::OneR, params, seed, |_, _| {
        if rng.random::<bool>() { MtjState::P } else { MtjState::AP }
    })
    .map_err(|e| e.to_string())?;
    let x: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let d: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let plan = schedule_phases(&x, &d, Architecture::OneR, mode, &MappingCoefficients::default(), &params)
        .map_err(|e| e.to_string())?;
    let Some(phase) = plan.iter().find(|p| p.enabled_rows() > 0 && p.enabled_cols() > 0) else {
        return Ok(vec![0.0; rows * cols]);
    };
    let sol = solve_1r_network(&xbar, phase).map_err(|e| e.to_string())?;
    Ok((0..cols)
        .flat_map(|j| (0..rows).map(move |i| (j, i)))
        .map(|(j, i)| sol.current(j, i) * 1e6)
        .collect())
}

#[wasm_bindgen(js_name = switchingCurve)]
pub fn switching_curve_js(dir: &str, current_ua: f64, t_max_ns: f64, points: usize) -> Result<Vec<f64>, JsValue> {
    switching_curve(dir, current_ua, t_max_ns, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = mappingGrid)]
pub fn mapping_grid_js(dir: &str, n: usize) -> Result<Vec<f64>, JsValue> {
    mapping_grid(dir, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = mappingMaxError)]
pub fn mapping_max_error_js(dir: &str, n: usize, eta: f64) -> Result<f64, JsValue> {
    mapping_max_error(dir, n, eta).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = sneakCurrents)]
pub fn sneak_currents_js(rows: usize, cols: usize, phases: u8, seed: u64) -> Result<Vec<f64>, JsValue> {
    sneak_currents(rows, cols, phases, seed).map_err(|e| JsValue::from_str(&e))
}
