//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every operation takes scenario text (the same `key = value` format the CLI
//! reads) and returns a JSON document shaped for plotting. The plain `*_json`
//! functions are usable natively; the `#[wasm_bindgen]` wrappers only convert
//! errors.

use edl::infodyn::{run_generations, theil_sen_slope, GenerationState};
use edl::io::config::parse_config;
use edl::io::presets::{self, PRESETS};
use edl::sweep::SimulationSettings;
use edl::{classify_regime, integrate, sweep_u, Scenario};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Upper bound on plotted trajectory samples.
pub const MAX_PLOT_POINTS: usize = 2000;

/// Largest generation count accepted from the page.
pub const MAX_GENERATIONS: u32 = 500;

fn scenario(text: &str) -> Result<Scenario, String> {
    parse_config(text).map_err(|e| e.to_string())
}

fn render(v: Value) -> String {
    v.to_string()
}

/// Trajectory (decimated for plotting) and the regime label of the full run.
pub fn simulate_json(config: &str) -> Result<String, String> {
    let s = scenario(config)?;
    let traj =
        integrate(&s.init, &s.params, &s.control, &s.integrator).map_err(|e| e.to_string())?;
    let regime = classify_regime(&traj, &s.params, &s.control, &s.classifier)
        .map(|l| l.label.to_string())
        .ok();
    let plot = traj.decimate(traj.len().div_ceil(MAX_PLOT_POINTS).max(1));
    let col = |f: fn(&edl::StateVec) -> f64| plot.states.iter().map(f).collect::<Vec<_>>();
    Ok(render(json!({
        "t": plot.times,
        "H": col(|x| x.h),
        "Q": col(|x| x.q),
        "M": col(|x| x.m),
        "regime": regime,
        "clamp_events": traj.clamp_events,
        "samples": traj.len(),
    })))
}

/// Steady states across the scenario's `u` grid with the detected threshold.
pub fn sweep_json(config: &str) -> Result<String, String> {
    let s = scenario(config)?;
    let spec = s.sweep_or_default();
    let grid = spec.grid.points().map_err(|e| e.to_string())?;
    let sim = SimulationSettings {
        init: s.init,
        integrator: s.integrator,
        thresholds: s.classifier,
    };
    let r = sweep_u(
        &s.params,
        s.control.alpha,
        s.control.beta,
        &grid,
        spec.mode,
        &sim,
        spec.band_fraction,
    )
    .map_err(|e| e.to_string())?;
    Ok(render(json!({
        "u": r.u_grid,
        "H": r.column(|x| x.h),
        "Q": r.column(|x| x.q),
        "M": r.column(|x| x.m),
        "max_re": r.eigen.iter().map(|e| e.max_re).collect::<Vec<_>>(),
        "u_c": r.threshold.u_c(),
        "band": r.threshold.band(),
    })))
}

/// Per-generation diagnostics of the information loop plus Theil–Sen trends.
/// `generations = 0` uses the scenario's own count.
pub fn infodyn_json(config: &str, generations: u32) -> Result<String, String> {
    let s = scenario(config)?;
    let spec = s.infodyn_or_default();
    let n = if generations == 0 {
        spec.generations
    } else {
        generations
    };
    if n > MAX_GENERATIONS {
        return Err(format!("generations must be <= {MAX_GENERATIONS}"));
    }
    let cfg = spec.resolve(s.control.u);
    let world = spec.world().map_err(|e| e.to_string())?;
    let init = GenerationState::initial(world, &cfg).map_err(|e| e.to_string())?;
    let rows = run_generations(&init, &cfg, n).map_err(|e| e.to_string())?;
    let col = |f: fn(&edl::GenerationMetrics) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let kl_mh = col(|r| r.kl_model_human);
    let kl_mw = col(|r| r.kl_model_world);
    Ok(render(json!({
        "gen": rows.iter().map(|r| r.generation).collect::<Vec<_>>(),
        "entropy_human": col(|r| r.entropy_human),
        "entropy_model": col(|r| r.entropy_model),
        "kl_model_human": kl_mh,
        "kl_model_world": kl_mw,
        "tail_support": rows.iter().map(|r| r.tail_support).collect::<Vec<_>>(),
        "mi_consecutive": rows.iter().map(|r| r.mi_consecutive).collect::<Vec<_>>(),
        "slope_kl_model_human": theil_sen_slope(&kl_mh),
        "slope_kl_model_world": theil_sen_slope(&kl_mw),
        "resolved": { "u": cfg.u, "lambda": cfg.lambda, "tau": cfg.tau },
    })))
}

pub fn preset_names_json() -> String {
    render(json!(PRESETS.iter().map(|p| p.name).collect::<Vec<_>>()))
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    presets::find(name).map(|p| p.text)
}

#[wasm_bindgen]
pub fn simulate(config: &str) -> Result<String, JsError> {
    simulate_json(config).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep(config: &str) -> Result<String, JsError> {
    sweep_json(config).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn infodyn(config: &str, generations: u32) -> Result<String, JsError> {
    infodyn_json(config, generations).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn preset_names() -> String {
    preset_names_json()
}

#[wasm_bindgen]
pub fn preset(name: &str) -> Result<String, JsError> {
    preset_text(name)
        .map(str::to_string)
        .ok_or_else(|| JsError::new(&format!("unknown preset `{name}`")))
}

#[wasm_bindgen]
pub fn version() -> String {
    edl::VERSION.to_string()
}
