//! Sweeps over the offloading degree `u`, threshold detection on the
//! steady-state curve `Q*(u)`, and single-channel intervention comparisons.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ControlParams, StateVec, SystemParams, Violations};
use crate::equilibrium::{
    analyze, classify_regime, fixed_point, max_real_part, ClassifierThresholds, ClassifyError,
    EquilibriumError, Regime, Stability,
};
use crate::integrate::{integrate, IntegrateError, IntegratorConfig};

pub const MIN_GRID: usize = 8;
pub const DEFAULT_BAND_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    #[default]
    Analytic,
    Simulated,
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMode::Analytic => "analytic",
            SweepMode::Simulated => "simulated",
        })
    }
}

impl FromStr for SweepMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "analytic" => Ok(SweepMode::Analytic),
            "simulated" => Ok(SweepMode::Simulated),
            other => Err(format!(
                "unknown sweep mode `{other}` (expected analytic|simulated)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    Invalid(Violations),
    #[error("at u = {u}: {source}")]
    Equilibrium { u: f64, source: EquilibriumError },
    #[error("at u = {u}: {source}")]
    Integrate { u: f64, source: IntegrateError },
    #[error("at u = {u}: {source}")]
    Classify { u: f64, source: ClassifyError },
}

/// Evenly spaced grid `start, start + step, …` up to and including `stop`
/// (within rounding).
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, Violations> {
    let mut v = Violations::default();
    if !(step.is_finite() && step > 0.0) {
        v.push("sweep.u_step", "must be > 0");
    }
    if !(start.is_finite() && stop.is_finite() && stop >= start) {
        v.push("sweep.u_stop", "must be >= sweep.u_start");
    }
    v.into_result()?;
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

pub fn validate_grid(grid: &[f64]) -> Result<(), Violations> {
    let mut v = Violations::default();
    if grid.len() < MIN_GRID {
        v.push(
            "sweep.grid",
            format!("needs at least {MIN_GRID} points, got {}", grid.len()),
        );
    }
    if let Some(bad) = grid.iter().find(|u| u.is_nan() || **u <= 0.0) {
        v.push(
            "sweep.grid",
            format!("contains u = {bad}; u must be > 0 (the equilibrium is singular at u = 0)"),
        );
    }
    if let Some(bad) = grid.iter().find(|u| **u > 1.0 || !u.is_finite()) {
        v.push(
            "sweep.grid",
            format!("contains u = {bad}; u must lie in (0,1]"),
        );
    }
    if grid
        .windows(2)
        .any(|w| w[1].is_nan() || w[0].is_nan() || w[1] <= w[0])
    {
        v.push("sweep.grid", "must be strictly increasing");
    }
    v.into_result()
}

/// Settings used by [`SweepMode::Simulated`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSettings {
    pub init: StateVec,
    pub integrator: IntegratorConfig,
    pub thresholds: ClassifierThresholds,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            init: StateVec::new(1.0, 1.0, 1.0),
            integrator: IntegratorConfig {
                horizon: 500.0,
                ..IntegratorConfig::default()
            },
            thresholds: ClassifierThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSummary {
    pub max_re: f64,
    pub stability: Stability,
}

/// Output of [`detect_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    Detected {
        u_c: f64,
        index: usize,
        band: [f64; 2],
        curvature: f64,
    },
    /// The curve has no curvature above rounding noise.
    None,
}

impl Threshold {
    pub fn u_c(&self) -> Option<f64> {
        match self {
            Threshold::Detected { u_c, .. } => Some(*u_c),
            Threshold::None => None,
        }
    }

    pub fn band(&self) -> Option<[f64; 2]> {
        match self {
            Threshold::Detected { band, .. } => Some(*band),
            Threshold::None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub mode: SweepMode,
    pub u_grid: Vec<f64>,
    pub steady_states: Vec<StateVec>,
    pub eigen: Vec<EigenSummary>,
    /// Only populated in simulated mode.
    pub regimes: Option<Vec<Regime>>,
    pub threshold: Threshold,
}

impl SweepResult {
    pub fn column(&self, pick: impl Fn(&StateVec) -> f64) -> Vec<f64> {
        self.steady_states.iter().map(pick).collect()
    }

    pub fn u_c(&self) -> Option<f64> {
        self.threshold.u_c()
    }
}

fn tail_mean(states: &[StateVec], fraction: f64) -> StateVec {
    let n = states.len();
    let w = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let tail = &states[n - w..];
    let sum = tail.iter().fold(StateVec::ZERO, |acc, x| acc + *x);
    (1.0 / w as f64) * sum
}

/// Steady states across a `u` grid, with per-point spectra and (simulated
/// mode) regime labels, followed by threshold detection on `Q*`.
pub fn sweep_u(
    params: &SystemParams,
    alpha: f64,
    beta: f64,
    u_grid: &[f64],
    mode: SweepMode,
    sim: &SimulationSettings,
    band_fraction: f64,
) -> Result<SweepResult, SweepError> {
    validate_grid(u_grid).map_err(SweepError::Invalid)?;

    let mut steady_states = Vec::with_capacity(u_grid.len());
    let mut eigen = Vec::with_capacity(u_grid.len());
    let mut regimes = Vec::new();
    for &u in u_grid {
        let control = ControlParams { alpha, beta, u };
        let report =
            analyze(params, &control).map_err(|source| SweepError::Equilibrium { u, source })?;
        eigen.push(EigenSummary {
            max_re: max_real_part(&report.eigenvalues),
            stability: report.stability,
        });
        match mode {
            SweepMode::Analytic => steady_states.push(report.fixed_point),
            SweepMode::Simulated => {
                let traj = integrate(&sim.init, params, &control, &sim.integrator)
                    .map_err(|source| SweepError::Integrate { u, source })?;
                steady_states.push(tail_mean(&traj.states, sim.thresholds.tail_fraction));
                let label = classify_regime(&traj, params, &control, &sim.thresholds)
                    .map_err(|source| SweepError::Classify { u, source })?;
                regimes.push(label.label);
            }
        }
    }
    let q: Vec<f64> = steady_states.iter().map(|x| x.q).collect();
    let threshold = detect_threshold(u_grid, &q, band_fraction).map_err(SweepError::Invalid)?;
    Ok(SweepResult {
        mode,
        u_grid: u_grid.to_vec(),
        steady_states,
        eigen,
        regimes: (mode == SweepMode::Simulated).then_some(regimes),
        threshold,
    })
}

/// Second divided differences of `values` at interior grid points
/// (index `i` of the result corresponds to grid index `i + 1`). On a uniform
/// grid this is `(v[i-1] - 2v[i] + v[i+1]) / step²`.
pub fn second_differences(grid: &[f64], values: &[f64]) -> Vec<f64> {
    (1..grid.len().saturating_sub(1))
        .map(|i| {
            let hl = grid[i] - grid[i - 1];
            let hr = grid[i + 1] - grid[i];
            let sl = (values[i] - values[i - 1]) / hl;
            let sr = (values[i + 1] - values[i]) / hr;
            2.0 * (sr - sl) / (hl + hr)
        })
        .collect()
}

/// Locates the point of maximal curvature of a sampled curve.
///
/// `u_c` is the interior grid point with the largest `|Δ²Q|` (ties go to the
/// smaller `u`); the band is the contiguous run of interior points around it
/// whose `|Δ²Q|` is at least `band_fraction` of that maximum.
pub fn detect_threshold(
    grid: &[f64],
    q: &[f64],
    band_fraction: f64,
) -> Result<Threshold, Violations> {
    let mut v = Violations::default();
    if grid.len() < MIN_GRID {
        v.push(
            "sweep.grid",
            format!("needs at least {MIN_GRID} points, got {}", grid.len()),
        );
    }
    if grid.len() != q.len() {
        v.push("sweep", "grid and value lengths differ");
    }
    if q.iter().any(|x| !x.is_finite()) {
        v.push("sweep", "Q* must be finite at every grid point");
    }
    if !(band_fraction > 0.0 && band_fraction <= 1.0) {
        v.push("threshold.band_fraction", "must lie in (0,1]");
    }
    v.into_result()?;

    let curv: Vec<f64> = second_differences(grid, q)
        .into_iter()
        .map(f64::abs)
        .collect();
    let (mut best, mut best_val) = (0usize, curv[0]);
    for (i, &c) in curv.iter().enumerate().skip(1) {
        if c > best_val {
            best = i;
            best_val = c;
        }
    }

    let min_step = grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let scale = q.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let noise = 64.0 * f64::EPSILON * scale / (min_step * min_step);
    if best_val.is_nan() || best_val <= noise {
        return Ok(Threshold::None);
    }

    let cut = band_fraction * best_val;
    let mut lo = best;
    while lo > 0 && curv[lo - 1] >= cut {
        lo -= 1;
    }
    let mut hi = best;
    while hi + 1 < curv.len() && curv[hi + 1] >= cut {
        hi += 1;
    }
    Ok(Threshold::Detected {
        u_c: grid[best + 1],
        index: best + 1,
        band: [grid[lo + 1], grid[hi + 1]],
        curvature: best_val,
    })
}

/// Increments applied to the exogenous inputs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Increments {
    pub r_h: f64,
    pub r_q: f64,
    pub r_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "r_H")]
    Human,
    #[serde(rename = "r_Q")]
    Quality,
    #[serde(rename = "r_M")]
    Model,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Human => "r_H",
            Channel::Quality => "r_Q",
            Channel::Model => "r_M",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionEffect {
    pub channel: Channel,
    pub increment: f64,
    pub steady_state: StateVec,
    pub delta: StateVec,
    /// Sign of each component of `delta` (-1, 0, 1).
    pub direction: [i8; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionReport {
    pub baseline: StateVec,
    pub effects: Vec<InterventionEffect>,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Steady-state response to raising each exogenous input on its own.
pub fn compare_interventions(
    params: &SystemParams,
    control: &ControlParams,
    increments: &Increments,
) -> Result<InterventionReport, EquilibriumError> {
    let mut v = Violations::default();
    for (name, x) in [
        ("dr_H", increments.r_h),
        ("dr_Q", increments.r_q),
        ("dr_M", increments.r_m),
    ] {
        if !(x.is_finite() && x >= 0.0) {
            v.push(name, "must be >= 0");
        }
    }
    v.into_result().map_err(EquilibriumError::Invalid)?;

    let baseline = fixed_point(params, control)?;
    let channels = [
        (Channel::Human, increments.r_h),
        (Channel::Quality, increments.r_q),
        (Channel::Model, increments.r_m),
    ];
    let mut effects = Vec::with_capacity(3);
    for (channel, increment) in channels {
        let mut p = *params;
        match channel {
            Channel::Human => p.r_h += increment,
            Channel::Quality => p.r_q += increment,
            Channel::Model => p.r_m += increment,
        }
        let steady_state = fixed_point(&p, control)?;
        let delta = steady_state - baseline;
        effects.push(InterventionEffect {
            channel,
            increment,
            steady_state,
            delta,
            direction: delta.to_array().map(sign),
        });
    }
    Ok(InterventionReport { baseline, effects })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid() -> Vec<f64> {
        (1..=10).map(|i| i as f64 / 10.0).collect()
    }

    fn analytic(grid: &[f64]) -> SweepResult {
        sweep_u(
            &SystemParams::unit(),
            1.0,
            1.0,
            grid,
            SweepMode::Analytic,
            &SimulationSettings::default(),
            DEFAULT_BAND_FRACTION,
        )
        .unwrap()
    }

    #[test]
    fn unit_closed_forms() {
        let r = analytic(&unit_grid());
        for (u, x) in r.u_grid.iter().zip(&r.steady_states) {
            let h = (1.0 - u) / u;
            assert!((x.h - h).abs() < 1e-12 * (1.0 + h));
            assert!((x.m - h / u).abs() < 1e-12 * (1.0 + h / u));
            assert!((x.q - h).abs() < 1e-12 * (1.0 + h));
        }
        assert_eq!(r.steady_states[4], StateVec::new(1.0, 1.0, 2.0));
        assert_eq!(r.steady_states[9], StateVec::ZERO);
        assert!(r.regimes.is_none());
    }

    #[test]
    fn unit_sweep_is_monotone() {
        let r = analytic(&unit_grid());
        for pick in [|x: &StateVec| x.h, |x: &StateVec| x.q, |x: &StateVec| x.m] {
            let col = r.column(pick);
            assert!(col.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn zero_in_grid_is_rejected() {
        let mut g = unit_grid();
        g[0] = 0.0;
        let err = validate_grid(&g).unwrap_err();
        assert!(err.to_string().contains("singular"));
    }

    #[test]
    fn short_grid_is_rejected() {
        assert!(validate_grid(&[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn uniform_grid_endpoints() {
        let g = uniform_grid(0.05, 1.0, 0.01).unwrap();
        assert_eq!(g.len(), 96);
        assert!((g[95] - 1.0).abs() < 1e-12);
        assert!(uniform_grid(0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn kink_is_found() {
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let q: Vec<f64> = grid
            .iter()
            .map(|&u| {
                if u <= 0.4 {
                    2.0 - u
                } else {
                    1.6 - 3.0 * (u - 0.4)
                }
            })
            .collect();
        let t = detect_threshold(&grid, &q, 0.5).unwrap();
        assert_eq!(t.u_c(), Some(0.4));
        assert_eq!(t.band(), Some([0.4, 0.4]));
    }

    #[test]
    fn constant_curve_has_no_threshold() {
        let grid = unit_grid();
        assert_eq!(
            detect_threshold(&grid, &[3.0; 10], 0.5).unwrap(),
            Threshold::None
        );
        let line: Vec<f64> = grid.iter().map(|u| 0.3 - 0.7 * u).collect();
        assert_eq!(
            detect_threshold(&grid, &line, 0.5).unwrap(),
            Threshold::None
        );
    }

    #[test]
    fn ties_go_to_smaller_u() {
        let grid = unit_grid();
        let q = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let t = detect_threshold(&grid, &q, 0.5).unwrap();
        assert_eq!(t.u_c(), Some(0.3));
    }

    #[test]
    fn simulated_matches_analytic() {
        let grid = unit_grid();
        let sim = SimulationSettings::default();
        let a = analytic(&grid);
        let s = sweep_u(
            &SystemParams::unit(),
            1.0,
            1.0,
            &grid,
            SweepMode::Simulated,
            &sim,
            0.5,
        )
        .unwrap();
        for (x, y) in a.steady_states.iter().zip(&s.steady_states) {
            for (p, q) in x.to_array().iter().zip(y.to_array()) {
                assert!((p - q).abs() <= 0.01 * p.abs() + 1e-9, "{x} vs {y}");
            }
        }
        let labels = s.regimes.unwrap();
        assert_eq!(labels.len(), grid.len());
    }

    #[test]
    fn intervention_examples() {
        let p = SystemParams::unit();
        let c = ControlParams::default();
        let inc = Increments {
            r_h: 1.0,
            r_q: 1.0,
            r_m: 1.0,
        };
        let r = compare_interventions(&p, &c, &inc).unwrap();
        assert_eq!(r.baseline, StateVec::new(1.0, 1.0, 2.0));

        let h = &r.effects[0];
        assert_eq!(h.channel, Channel::Human);
        assert!((h.delta.h - 2.0).abs() < 1e-12);
        assert_eq!(h.direction, [1, 1, 1]);

        let q = &r.effects[1];
        assert!((q.delta.m - 2.0).abs() < 1e-12);
        assert_eq!(q.delta.h, 0.0);

        let m = &r.effects[2];
        assert_eq!(m.delta.h, 0.0);
        assert_eq!(m.delta.m, 0.0);
        assert!((m.delta.q + 1.0).abs() < 1e-12);
        assert_eq!(m.direction, [0, -1, 0]);
    }

    #[test]
    fn negative_increment_rejected() {
        let inc = Increments {
            r_q: -0.5,
            ..Increments::default()
        };
        assert!(
            compare_interventions(&SystemParams::unit(), &ControlParams::default(), &inc).is_err()
        );
    }

    proptest! {
        #[test]
        fn positive_params_decline_monotonically(
            k in prop::array::uniform6(0.1..10.0f64),
            alpha in 0.1..10.0f64,
            beta in 0.1..10.0f64,
            start in 0.01..0.5f64,
            step in 0.005..0.05f64,
        ) {
            let p = SystemParams { a: k[0], b: k[1], c: k[2], d: k[3], e: k[4], f: k[5], ..SystemParams::unit() };
            let grid: Vec<f64> = (0..10).map(|i| start + i as f64 * step).collect();
            let r = sweep_u(&p, alpha, beta, &grid, SweepMode::Analytic, &SimulationSettings::default(), 0.5).unwrap();
            for pick in [|x: &StateVec| x.h, |x: &StateVec| x.q, |x: &StateVec| x.m] {
                let col = r.column(pick);
                prop_assert!(col.windows(2).all(|w| w[1] <= w[0]));
            }
        }

        #[test]
        fn threshold_ignores_offset_and_scale(
            shift in prop::sample::select(vec![-8.0, -0.5, 0.25, 3.0, 64.0]),
            scale in prop::sample::select(vec![0.125, 0.5, 2.0, 16.0]),
            kink in 2usize..8,
        ) {
            let grid = unit_grid();
            let q: Vec<f64> = (0..10).map(|i| if i <= kink { -(i as f64) } else { -(kink as f64) - 4.0 * (i - kink) as f64 }).collect();
            let base = detect_threshold(&grid, &q, 0.5).unwrap();
            let shifted: Vec<f64> = q.iter().map(|x| x + shift).collect();
            let scaled: Vec<f64> = q.iter().map(|x| x * scale).collect();
            prop_assert_eq!(detect_threshold(&grid, &shifted, 0.5).unwrap().u_c(), base.u_c());
            prop_assert_eq!(detect_threshold(&grid, &shifted, 0.5).unwrap().band(), base.band());
            prop_assert_eq!(detect_threshold(&grid, &scaled, 0.5).unwrap().u_c(), base.u_c());
            prop_assert_eq!(base.u_c(), Some(grid[kink]));
        }

        #[test]
        fn interventions_are_additive(
            k in prop::array::uniform6(0.1..10.0f64),
            u in 0.05..1.0f64,
            dh in 0.0..2.0f64,
            dq in 0.0..2.0f64,
        ) {
            let p = SystemParams { a: k[0], b: k[1], c: k[2], d: k[3], e: k[4], f: k[5], ..SystemParams::unit() };
            let c = ControlParams::default().with_u(u);
            let r = compare_interventions(&p, &c, &Increments { r_h: dh, r_q: dq, r_m: 0.0 }).unwrap();
            let both = fixed_point(&SystemParams { r_h: dh, r_q: dq, ..p }, &c).unwrap();
            let summed = r.baseline + r.effects[0].delta + r.effects[1].delta;
            prop_assert!((both - summed).norm() <= 1e-9 * (1.0 + both.norm()));
        }
    }
}
