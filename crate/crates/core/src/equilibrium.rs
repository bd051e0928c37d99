//! Closed-form fixed point, Jacobian and eigenvalues of the linear-closure
//! system, plus trajectory-based regime labelling.
//!
//! Under the linear closure the vector field is affine in the state, so the
//! Jacobian is constant:
//!
//! ```text
//!     | -b·u   0      0     |
//! J = |  c     0    -d·α·u  |
//!     |  0     e    -f·β·α·u|
//! ```
//!
//! The first row decouples, so the spectrum is `-b·u` together with the two
//! roots of `λ² + f·β·α·u·λ + e·d·α·u`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{field, validate, ControlParams, StateVec, SystemParams, Violations};
use crate::integrate::Trajectory;

pub type Matrix3 = [[f64; 3]; 3];

/// Real parts within this distance of zero count as marginal.
pub const EIGEN_EPS: f64 = 1e-10;

/// Relative residual bound a reported fixed point must satisfy.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("invalid parameters: {0}")]
    Invalid(Violations),
    #[error("singular equilibrium at u = {u}: b·u = 0, so dH/dt = 0 has no finite solution")]
    Singular { u: f64 },
    #[error("fixed point {point} leaves residual {residual:e}")]
    Residual { point: StateVec, residual: f64 },
}

/// `‖f(x)‖`.
pub fn residual(x: &StateVec, params: &SystemParams, control: &ControlParams) -> f64 {
    field(x, params, control).norm()
}

/// The unique equilibrium for `u > 0`.
///
/// `H*` comes from `dH/dt = 0`, `M*` from `dQ/dt = 0` and `Q*` from
/// `dM/dt = 0`. The point may lie outside the nonnegative orthant when `r_M`
/// outweighs the synthetic-noise term.
pub fn fixed_point(
    params: &SystemParams,
    control: &ControlParams,
) -> Result<StateVec, EquilibriumError> {
    validate(params, control).map_err(EquilibriumError::Invalid)?;
    let SystemParams {
        a,
        b,
        c,
        d,
        e,
        f,
        r_h,
        r_q,
        r_m,
    } = *params;
    let ControlParams { alpha, beta, u } = *control;
    if b * u == 0.0 {
        return Err(EquilibriumError::Singular { u });
    }
    let h = (a * (1.0 - u) + r_h) / (b * u);
    let m = (c * h + r_q) / (d * alpha * u);
    let q = (f * beta * alpha * u * m - r_m) / e;
    let point = StateVec::new(h, q, m);

    let res = residual(&point, params, control);
    if res.is_nan() || res >= RESIDUAL_TOL * (1.0 + point.norm()) {
        return Err(EquilibriumError::Residual {
            point,
            residual: res,
        });
    }
    Ok(point)
}

/// Jacobian of the vector field; state-independent under the linear closure.
pub fn jacobian(params: &SystemParams, control: &ControlParams) -> Matrix3 {
    let ControlParams { alpha, beta, u } = *control;
    [
        [-params.b * u, 0.0, 0.0],
        [params.c, 0.0, -params.d * alpha * u],
        [0.0, params.e, -params.f * beta * alpha * u],
    ]
}

pub fn trace(j: &Matrix3) -> f64 {
    j[0][0] + j[1][1] + j[2][2]
}

pub fn determinant(j: &Matrix3) -> f64 {
    j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
        - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("matrix is not block lower-triangular: first row has off-diagonal entries ({0}, {1})")]
pub struct NotBlockTriangular(pub f64, pub f64);

/// Roots of `λ² + p·λ + q`, using the cancellation-free form for real roots.
fn quadratic_roots(p: f64, q: f64) -> [Complex64; 2] {
    let disc = p * p - 4.0 * q;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let r1 = -0.5 * (p + s.copysign(p));
        if r1 == 0.0 {
            // p = 0 and q = 0.
            return [Complex64::new(0.0, 0.0), Complex64::new(-p, 0.0)];
        }
        [Complex64::new(r1, 0.0), Complex64::new(q / r1, 0.0)]
    } else {
        let re = -0.5 * p;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, -im), Complex64::new(re, im)]
    }
}

fn sort_eigenvalues(v: &mut [Complex64; 3]) {
    v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
}

/// Spectrum of a matrix whose first row is zero off the diagonal: the
/// decoupled root `J[0][0]` and the two eigenvalues of the lower 2×2 block,
/// sorted by real part (then imaginary part).
pub fn eigenvalues(j: &Matrix3) -> Result<[Complex64; 3], NotBlockTriangular> {
    if j[0][1] != 0.0 || j[0][2] != 0.0 {
        return Err(NotBlockTriangular(j[0][1], j[0][2]));
    }
    let p = -(j[1][1] + j[2][2]);
    let q = j[1][1] * j[2][2] - j[1][2] * j[2][1];
    let [r1, r2] = quadratic_roots(p, q);
    let mut out = [Complex64::new(j[0][0], 0.0), r1, r2];
    sort_eigenvalues(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    StableNode,
    StableSpiralMixed,
    Unstable,
    Marginal,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::StableNode => "StableNode",
            Stability::StableSpiralMixed => "StableSpiralMixed",
            Stability::Unstable => "Unstable",
            Stability::Marginal => "Marginal",
        })
    }
}

impl FromStr for Stability {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "StableNode" => Ok(Stability::StableNode),
            "StableSpiralMixed" => Ok(Stability::StableSpiralMixed),
            "Unstable" => Ok(Stability::Unstable),
            "Marginal" => Ok(Stability::Marginal),
            other => Err(format!("unknown stability class `{other}`")),
        }
    }
}

pub fn max_real_part(eigs: &[Complex64]) -> f64 {
    eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn classify_stability(eigs: &[Complex64]) -> Stability {
    let max_re = max_real_part(eigs);
    if max_re > EIGEN_EPS {
        Stability::Unstable
    } else if max_re >= -EIGEN_EPS {
        Stability::Marginal
    } else if eigs.iter().all(|z| z.im == 0.0) {
        Stability::StableNode
    } else {
        Stability::StableSpiralMixed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub fixed_point: StateVec,
    pub jacobian: Matrix3,
    pub eigenvalues: [Complex64; 3],
    pub stability: Stability,
    pub residual: f64,
}

/// Fixed point, Jacobian, spectrum and stability class in one pass.
pub fn analyze(
    params: &SystemParams,
    control: &ControlParams,
) -> Result<EquilibriumReport, EquilibriumError> {
    let fixed_point = fixed_point(params, control)?;
    let jacobian = jacobian(params, control);
    let eigenvalues = eigenvalues(&jacobian).expect("linear-closure Jacobian is block triangular");
    Ok(EquilibriumReport {
        fixed_point,
        jacobian,
        eigenvalues,
        stability: classify_stability(&eigenvalues),
        residual: residual(&fixed_point, params, control),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Enhancement,
    Equilibrium,
    Degeneration,
    Unclassified,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Enhancement => "Enhancement",
            Regime::Equilibrium => "Equilibrium",
            Regime::Degeneration => "Degeneration",
            Regime::Unclassified => "Unclassified",
        })
    }
}

impl FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "Enhancement" => Ok(Regime::Enhancement),
            "Equilibrium" => Ok(Regime::Equilibrium),
            "Degeneration" => Ok(Regime::Degeneration),
            "Unclassified" => Ok(Regime::Unclassified),
            other => Err(format!("unknown regime `{other}`")),
        }
    }
}

/// Thresholds of the regime classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierThresholds {
    /// Bound on `‖f(x(T))‖ / (1 + ‖x(T)‖)` for convergence.
    pub eps_eq: f64,
    /// Bound on every tail-window relative slope for convergence.
    pub s_conv: f64,
    /// Minimum relative growth rate of every component for enhancement.
    pub s_min: f64,
    /// Fractional decline of H and Q that marks degeneration.
    pub delta: f64,
    /// Fraction of samples forming the tail window.
    pub tail_fraction: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        Self {
            eps_eq: 1e-4,
            s_conv: 1e-4,
            s_min: 1e-3,
            delta: 0.1,
            tail_fraction: 0.1,
        }
    }
}

impl ClassifierThresholds {
    pub fn validate(&self) -> Result<(), Violations> {
        let mut v = Violations::default();
        for (name, x) in [
            ("classifier.eps_eq", self.eps_eq),
            ("classifier.s_conv", self.s_conv),
            ("classifier.s_min", self.s_min),
        ] {
            if !(x.is_finite() && x > 0.0) {
                v.push(name, "must be > 0");
            }
        }
        if !(0.0..1.0).contains(&self.delta) {
            v.push("classifier.delta", "must lie in [0,1)");
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            v.push("classifier.tail_fraction", "must lie in (0,1]");
        }
        v.into_result()
    }
}

/// Everything the classifier looked at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeEvidence {
    pub initial: StateVec,
    pub terminal: StateVec,
    /// Normalized field residual at the last sample.
    pub residual: f64,
    /// Mean slope of each component over the tail window.
    pub tail_slopes: [f64; 3],
    /// `tail_slopes[i] / (1 + |x_i(T)|)`.
    pub relative_slopes: [f64; 3],
    pub tail_samples: usize,
}

impl RegimeEvidence {
    pub fn converged(&self, th: &ClassifierThresholds) -> bool {
        self.residual < th.eps_eq && self.relative_slopes.iter().all(|s| s.abs() < th.s_conv)
    }

    /// Applies the classifier rules to this evidence.
    pub fn label(&self, th: &ClassifierThresholds) -> Regime {
        if self.converged(th) {
            let keep = 1.0 - th.delta;
            if self.terminal.h < keep * self.initial.h && self.terminal.q < keep * self.initial.q {
                Regime::Degeneration
            } else {
                Regime::Equilibrium
            }
        } else if self
            .relative_slopes
            .iter()
            .zip(&self.tail_slopes)
            .all(|(rel, raw)| *raw > 0.0 && *rel > th.s_min)
        {
            Regime::Enhancement
        } else {
            Regime::Unclassified
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub label: Regime,
    pub evidence: RegimeEvidence,
}

pub const MIN_CLASSIFY_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("trajectory has {0} samples; at least {MIN_CLASSIFY_SAMPLES} are needed")]
    TooShort(usize),
    #[error("invalid classifier thresholds: {0}")]
    Thresholds(Violations),
}

/// Labels a trajectory as enhancement, equilibrium or degeneration.
///
/// Rules, on the tail window `W` (last `tail_fraction` of the samples):
/// 1. converged if the normalized residual at `T` is below `eps_eq` and
///    every relative slope over `W` is below `s_conv` in magnitude;
/// 2. converged with both H and Q ending below `(1 - delta)` times their
///    initial values is degeneration;
/// 3. any other converged trajectory is equilibrium;
/// 4. unconverged with every component rising faster than `s_min`
///    (relative) is enhancement;
/// 5. anything else is unclassified.
pub fn classify_regime(
    traj: &Trajectory,
    params: &SystemParams,
    control: &ControlParams,
    thresholds: &ClassifierThresholds,
) -> Result<RegimeLabel, ClassifyError> {
    thresholds.validate().map_err(ClassifyError::Thresholds)?;
    let n = traj.len();
    if n < MIN_CLASSIFY_SAMPLES {
        return Err(ClassifyError::TooShort(n));
    }
    let window = ((thresholds.tail_fraction * n as f64).ceil() as usize).clamp(2, n);
    let start = n - window;
    let (t0, t1) = (traj.times[start], traj.times[n - 1]);
    let (x0, x1) = (traj.states[start].to_array(), traj.states[n - 1].to_array());
    let dt = t1 - t0;

    let mut tail_slopes = [0.0; 3];
    let mut relative_slopes = [0.0; 3];
    for i in 0..3 {
        tail_slopes[i] = (x1[i] - x0[i]) / dt;
        relative_slopes[i] = tail_slopes[i] / (1.0 + x1[i].abs());
    }
    let terminal = traj.states[n - 1];
    let evidence = RegimeEvidence {
        initial: traj.states[0],
        terminal,
        residual: residual(&terminal, params, control) / (1.0 + terminal.norm()),
        tail_slopes,
        relative_slopes,
        tail_samples: window,
    };
    Ok(RegimeLabel {
        label: evidence.label(thresholds),
        evidence,
    })
}
