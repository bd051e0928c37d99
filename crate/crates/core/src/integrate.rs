//! Fixed-step integration (forward Euler and classical RK4) with trajectory
//! recording.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    control_signals, field, ControlParams, ControlSignals, StateVec, SystemParams, Violations,
};

pub const DEFAULT_STEP: f64 = 0.01;
pub const DEFAULT_HORIZON: f64 = 100.0;
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Euler,
    Rk4,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
        })
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Method::Euler),
            "rk4" => Ok(Method::Rk4),
            other => Err(format!(
                "unknown integration method `{other}` (expected euler|rk4)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub step: f64,
    pub horizon: f64,
    pub clamp_nonneg: bool,
    pub max_steps: u64,
    /// Record every `stride`-th step (the final sample is always kept).
    pub stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Euler,
            step: DEFAULT_STEP,
            horizon: DEFAULT_HORIZON,
            clamp_nonneg: true,
            max_steps: DEFAULT_MAX_STEPS,
            stride: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn new(method: Method, step: f64, horizon: f64) -> Self {
        Self {
            method,
            step,
            horizon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), Violations> {
        let mut v = Violations::default();
        if !(self.step.is_finite() && self.step > 0.0) {
            v.push("integrator.h", "must be > 0");
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            v.push("integrator.horizon", "must be > 0");
        }
        if self.stride == 0 {
            v.push("integrator.stride", "must be >= 1");
        }
        if v.is_empty() && self.step_count() > self.max_steps {
            v.push(
                "integrator.horizon",
                format!("needs more than max_steps = {} steps", self.max_steps),
            );
        }
        v.into_result()
    }

    /// Number of steps to reach the horizon. The last step may be shorter so
    /// that the grid lands exactly on `horizon`.
    pub fn step_count(&self) -> u64 {
        let ratio = self.horizon / self.step;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as u64
        } else {
            ratio.ceil() as u64
        }
    }

    /// Time of the `i`-th grid point.
    pub fn time_at(&self, i: u64) -> f64 {
        if i >= self.step_count() {
            self.horizon
        } else {
            i as f64 * self.step
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid integrator configuration: {0}")]
    Config(Violations),
    #[error("invalid initial state: {0}")]
    InitialState(Violations),
    #[error("state became non-finite at step {step} (t = {time}); last finite state {last_finite} at t = {last_time}")]
    Diverged {
        step: u64,
        time: f64,
        last_finite: StateVec,
        last_time: f64,
    },
}

fn project(x: StateVec, clamp: bool) -> (StateVec, usize) {
    if clamp {
        x.clamp_nonneg()
    } else {
        (x, 0)
    }
}

/// One forward Euler step, `x + h·f(x)`, without the orthant projection.
#[inline]
pub fn euler_raw(x: &StateVec, p: &SystemParams, c: &ControlParams, h: f64) -> StateVec {
    *x + h * field(x, p, c)
}

/// One classical RK4 step without the orthant projection.
#[inline]
pub fn rk4_raw(x: &StateVec, p: &SystemParams, c: &ControlParams, h: f64) -> StateVec {
    let k1 = field(x, p, c);
    let k2 = field(&(*x + (0.5 * h) * k1), p, c);
    let k3 = field(&(*x + (0.5 * h) * k2), p, c);
    let k4 = field(&(*x + h * k3), p, c);
    *x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

fn checked(next: StateVec, prev: &StateVec, step: u64, h: f64) -> Result<StateVec, IntegrateError> {
    if next.is_finite() {
        Ok(next)
    } else {
        Err(IntegrateError::Diverged {
            step,
            time: h,
            last_finite: *prev,
            last_time: 0.0,
        })
    }
}

/// Forward Euler step followed by the optional projection onto the
/// nonnegative orthant.
pub fn euler_step(
    state: &StateVec,
    params: &SystemParams,
    control: &ControlParams,
    h: f64,
    clamp: bool,
) -> Result<StateVec, IntegrateError> {
    let next = checked(euler_raw(state, params, control, h), state, 1, h)?;
    Ok(project(next, clamp).0)
}

/// RK4 step; the projection is applied once, after the combined update.
pub fn rk4_step(
    state: &StateVec,
    params: &SystemParams,
    control: &ControlParams,
    h: f64,
    clamp: bool,
) -> Result<StateVec, IntegrateError> {
    let next = checked(rk4_raw(state, params, control, h), state, 1, h)?;
    Ok(project(next, clamp).0)
}

/// Sampled solution of the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVec>,
    pub signals: Vec<ControlSignals>,
    /// Number of state components moved by the orthant projection.
    pub clamp_events: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> Option<&StateVec> {
        self.states.first()
    }

    pub fn last(&self) -> Option<&StateVec> {
        self.states.last()
    }

    /// Keeps every `factor`-th sample plus the final one.
    pub fn decimate(&self, factor: usize) -> Trajectory {
        let factor = factor.max(1);
        let n = self.len();
        let keep: Vec<usize> = (0..n).filter(|i| i % factor == 0 || *i + 1 == n).collect();
        Trajectory {
            times: keep.iter().map(|&i| self.times[i]).collect(),
            states: keep.iter().map(|&i| self.states[i]).collect(),
            signals: keep.iter().map(|&i| self.signals[i]).collect(),
            clamp_events: self.clamp_events,
        }
    }
}

/// Integrates from `t = 0` to `config.horizon` inclusive.
pub fn integrate(
    init: &StateVec,
    params: &SystemParams,
    control: &ControlParams,
    config: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    config.validate().map_err(IntegrateError::Config)?;
    if !init.is_finite() {
        return Err(IntegrateError::InitialState(init.check().unwrap_err()));
    }
    if config.clamp_nonneg {
        init.check().map_err(IntegrateError::InitialState)?;
    }

    let n = config.step_count();
    let capacity = (n as usize) / config.stride + 2;
    let mut traj = Trajectory {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        signals: Vec::with_capacity(capacity),
        clamp_events: 0,
    };
    let record = |traj: &mut Trajectory, t: f64, x: StateVec| {
        traj.times.push(t);
        traj.states.push(x);
        traj.signals.push(control_signals(&x, control));
    };

    let mut x = *init;
    let mut t = 0.0;
    record(&mut traj, t, x);
    for i in 1..=n {
        let t_next = config.time_at(i);
        let h = t_next - t;
        let raw = match config.method {
            Method::Euler => euler_raw(&x, params, control, h),
            Method::Rk4 => rk4_raw(&x, params, control, h),
        };
        if !raw.is_finite() {
            return Err(IntegrateError::Diverged {
                step: i,
                time: t_next,
                last_finite: x,
                last_time: t,
            });
        }
        let (next, moved) = project(raw, config.clamp_nonneg);
        traj.clamp_events += moved as u64;
        x = next;
        t = t_next;
        if i % config.stride as u64 == 0 || i == n {
            record(&mut traj, t, x);
        }
    }
    Ok(traj)
}

/// Final state only; avoids recording the whole path.
pub fn integrate_final(
    init: &StateVec,
    params: &SystemParams,
    control: &ControlParams,
    config: &IntegratorConfig,
) -> Result<StateVec, IntegrateError> {
    let cfg = IntegratorConfig {
        stride: usize::MAX,
        ..*config
    };
    let traj = integrate(init, params, control, &cfg)?;
    Ok(*traj
        .last()
        .expect("trajectory always holds the initial state"))
}
