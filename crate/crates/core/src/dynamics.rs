//! State space, parameters and the vector field of the coupled
//! human cognition (H) / data quality (Q) / model capability (M) system.
//!
//! ```text
//! dH/dt = a(1-u) - b·u·H + r_H
//! dQ/dt = c·H    - d·A   + r_Q
//! dM/dt = e·Q    - f·S   + r_M
//! ```
//!
//! The control signals `A` (AI-generated content) and `S` (synthetic noise)
//! are produced by a [`ControlClosure`]; the linear closure `A = α·u·M`,
//! `S = β·A` is the one used throughout the crate.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// System state `(H, Q, M)`. Dimensionless; valid states are finite and
/// nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVec {
    pub h: f64,
    pub q: f64,
    pub m: f64,
}

impl StateVec {
    pub const ZERO: StateVec = StateVec {
        h: 0.0,
        q: 0.0,
        m: 0.0,
    };

    pub const fn new(h: f64, q: f64, m: f64) -> Self {
        Self { h, q, m }
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.h, self.q, self.m]
    }

    pub fn norm(self) -> f64 {
        (self.h * self.h + self.q * self.q + self.m * self.m).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.h.is_finite() && self.q.is_finite() && self.m.is_finite()
    }

    /// Componentwise `max(0, ·)`. Returns the projected state and how many
    /// components were actually moved.
    pub fn clamp_nonneg(self) -> (Self, usize) {
        let mut moved = 0;
        let mut clamp = |x: f64| {
            if x < 0.0 {
                moved += 1;
                0.0
            } else {
                x
            }
        };
        let out = StateVec::new(clamp(self.h), clamp(self.q), clamp(self.m));
        (out, moved)
    }

    /// Checks the orthant invariant: every component finite and `>= 0`.
    pub fn check(self) -> Result<(), Violations> {
        let mut v = Violations::default();
        for (name, x) in [("H", self.h), ("Q", self.q), ("M", self.m)] {
            if !x.is_finite() {
                v.push(name, "must be finite");
            } else if x < 0.0 {
                v.push(name, "must be >= 0");
            }
        }
        v.into_result()
    }
}

impl Add for StateVec {
    type Output = StateVec;
    fn add(self, o: StateVec) -> StateVec {
        StateVec::new(self.h + o.h, self.q + o.q, self.m + o.m)
    }
}

impl Sub for StateVec {
    type Output = StateVec;
    fn sub(self, o: StateVec) -> StateVec {
        StateVec::new(self.h - o.h, self.q - o.q, self.m - o.m)
    }
}

impl Mul<StateVec> for f64 {
    type Output = StateVec;
    fn mul(self, x: StateVec) -> StateVec {
        StateVec::new(self * x.h, self * x.q, self * x.m)
    }
}

impl fmt::Display for StateVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(H={}, Q={}, M={})", self.h, self.q, self.m)
    }
}

/// Rate constants of the vector field.
///
/// `a`, `c`, `e` are reinforcement rates, `b`, `d`, `f` degradation rates and
/// `r_h`, `r_q`, `r_m` exogenous (intervention) inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub r_h: f64,
    pub r_q: f64,
    pub r_m: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::unit()
    }
}

impl SystemParams {
    /// All rates 1, no exogenous input.
    pub const fn unit() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            d: 1.0,
            e: 1.0,
            f: 1.0,
            r_h: 0.0,
            r_q: 0.0,
            r_m: 0.0,
        }
    }

    fn check_into(&self, v: &mut Violations) {
        for (name, x) in [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("e", self.e),
            ("f", self.f),
        ] {
            if !x.is_finite() {
                v.push(name, "must be finite");
            } else if x <= 0.0 {
                v.push(name, "must be > 0");
            }
        }
        for (name, x) in [("r_H", self.r_h), ("r_Q", self.r_q), ("r_M", self.r_m)] {
            if !x.is_finite() {
                v.push(name, "must be finite");
            } else if x < 0.0 {
                v.push(name, "must be >= 0");
            }
        }
    }
}

/// Control parameters: offloading degree `u` and the closure gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub alpha: f64,
    pub beta: f64,
    pub u: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            u: 0.5,
        }
    }
}

impl ControlParams {
    pub fn with_u(self, u: f64) -> Self {
        Self { u, ..self }
    }

    fn check_into(&self, v: &mut Violations) {
        for (name, x) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !x.is_finite() {
                v.push(name, "must be finite");
            } else if x <= 0.0 {
                v.push(name, "must be > 0");
            }
        }
        if !(0.0..=1.0).contains(&self.u) {
            v.push("u", "must lie in [0,1]");
        }
    }
}

/// AI-generated content volume `A` and synthetic noise level `S`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlSignals {
    #[serde(rename = "A")]
    pub content: f64,
    #[serde(rename = "S")]
    pub noise: f64,
}

/// A single failed constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.field, self.constraint)
    }
}

/// Every constraint violation found during validation, in field order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Error)]
pub struct Violations(pub Vec<Violation>);

impl Violations {
    pub fn push(&mut self, field: impl Into<String>, constraint: impl Into<String>) {
        self.0.push(Violation {
            field: field.into(),
            constraint: constraint.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Violation> {
        self.0.iter()
    }

    pub fn extend(&mut self, other: Violations) {
        self.0.extend(other.0);
    }

    pub fn into_result(self) -> Result<(), Violations> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks every parameter invariant and reports all violations at once.
pub fn validate(params: &SystemParams, control: &ControlParams) -> Result<(), Violations> {
    let mut v = Violations::default();
    params.check_into(&mut v);
    control.check_into(&mut v);
    v.into_result()
}

/// Maps model capability to the control signals `(A, S)`.
///
/// This is the single seam through which a nonlinear `A = g(u, M)`,
/// `S = h(A)` would enter the system.
pub trait ControlClosure {
    fn signals(&self, m: f64, control: &ControlParams) -> ControlSignals;
}

/// `A = α·u·M`, `S = β·A`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinearClosure;

impl ControlClosure for LinearClosure {
    #[inline]
    fn signals(&self, m: f64, control: &ControlParams) -> ControlSignals {
        let content = control.alpha * control.u * m;
        ControlSignals {
            content,
            noise: control.beta * content,
        }
    }
}

pub fn control_signals(state: &StateVec, control: &ControlParams) -> ControlSignals {
    LinearClosure.signals(state.m, control)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("vector field component {component} is not finite")]
pub struct NonFiniteRate {
    pub component: &'static str,
}

/// Evaluates the vector field under an arbitrary closure without checking
/// for overflow.
#[inline]
pub fn field_with<C: ControlClosure>(
    closure: &C,
    x: &StateVec,
    p: &SystemParams,
    control: &ControlParams,
) -> StateVec {
    let sig = closure.signals(x.m, control);
    let u = control.u;
    StateVec {
        h: p.a * (1.0 - u) - p.b * u * x.h + p.r_h,
        q: p.c * x.h - p.d * sig.content + p.r_q,
        m: p.e * x.q - p.f * sig.noise + p.r_m,
    }
}

/// Unchecked linear-closure vector field. Used on hot paths; see
/// [`derivative`] for the checked version.
#[inline]
pub fn field(x: &StateVec, p: &SystemParams, control: &ControlParams) -> StateVec {
    field_with(&LinearClosure, x, p, control)
}

/// `(dH/dt, dQ/dt, dM/dt)` at `state`. The result is not clamped, even on the
/// boundary of the orthant.
pub fn derivative(
    state: &StateVec,
    params: &SystemParams,
    control: &ControlParams,
) -> Result<StateVec, NonFiniteRate> {
    let r = field(state, params, control);
    for (component, x) in [("H", r.h), ("Q", r.q), ("M", r.m)] {
        if !x.is_finite() {
            return Err(NonFiniteRate { component });
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_control(u: f64) -> ControlParams {
        ControlParams {
            alpha: 1.0,
            beta: 1.0,
            u,
        }
    }

    #[test]
    fn validate_accepts_unit_rates() {
        assert!(validate(&SystemParams::unit(), &unit_control(0.5)).is_ok());
    }

    #[test]
    fn validate_rejects_zero_b() {
        let p = SystemParams {
            b: 0.0,
            ..SystemParams::unit()
        };
        let err = validate(&p, &unit_control(0.5)).unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err.to_string(), "b must be > 0");
    }

    #[test]
    fn validate_rejects_u_out_of_range() {
        let err = validate(&SystemParams::unit(), &unit_control(1.2)).unwrap_err();
        assert_eq!(err.to_string(), "u must lie in [0,1]");
    }

    #[test]
    fn validate_reports_every_violation() {
        let p = SystemParams {
            a: -1.0,
            d: f64::NAN,
            r_m: -0.1,
            ..SystemParams::unit()
        };
        let c = ControlParams {
            alpha: 0.0,
            beta: 1.0,
            u: -0.1,
        };
        let err = validate(&p, &c).unwrap_err();
        let fields: Vec<&str> = err.iter().map(|v| v.field.as_str()).collect();
        assert_eq!(fields, ["a", "d", "r_M", "alpha", "u"]);
    }

    #[test]
    fn signals_examples() {
        let s = control_signals(&StateVec::new(0.0, 0.0, 1.0), &unit_control(0.5));
        assert_eq!((s.content, s.noise), (0.5, 0.5));
        let s = control_signals(&StateVec::new(3.0, 3.0, 7.0), &unit_control(0.0));
        assert_eq!((s.content, s.noise), (0.0, 0.0));
        let c = ControlParams {
            alpha: 0.5,
            beta: 2.0,
            u: 1.0,
        };
        let s = control_signals(&StateVec::new(0.0, 0.0, 2.0), &c);
        assert_eq!((s.content, s.noise), (1.0, 2.0));
    }

    #[test]
    fn derivative_examples() {
        let p = SystemParams::unit();
        let x = StateVec::new(1.0, 1.0, 1.0);
        let r = derivative(&x, &p, &unit_control(0.5)).unwrap();
        assert_eq!(r, StateVec::new(0.0, 0.5, 0.5));

        let r = derivative(&x, &p, &unit_control(0.0)).unwrap();
        assert_eq!(r, StateVec::new(1.0, 1.0, 1.0));

        let p = SystemParams {
            b: 0.5,
            r_h: 0.1,
            ..SystemParams::unit()
        };
        let r = derivative(&StateVec::new(2.0, 0.0, 0.0), &p, &unit_control(1.0)).unwrap();
        assert!((r.h - -0.9).abs() < 1e-15);
    }

    #[test]
    fn derivative_reports_overflowing_component() {
        let p = SystemParams {
            c: f64::MAX,
            ..SystemParams::unit()
        };
        let err = derivative(&StateVec::new(10.0, 0.0, 0.0), &p, &unit_control(0.5)).unwrap_err();
        assert_eq!(err.component, "Q");
    }

    #[test]
    fn boundary_rate_is_not_clamped() {
        let p = SystemParams {
            a: 0.0,
            ..SystemParams::unit()
        };
        // H = 0 with M large: dQ/dt is negative and returned as such.
        let r = field(&StateVec::new(0.0, 0.0, 10.0), &p, &unit_control(1.0));
        assert!(r.q < 0.0);
    }

    fn coord() -> impl Strategy<Value = f64> {
        0.0..10.0f64
    }

    fn params() -> impl Strategy<Value = (SystemParams, ControlParams)> {
        (
            prop::array::uniform6(0.1..10.0f64),
            prop::array::uniform3(0.0..1.0f64),
            0.1..10.0f64,
            0.1..10.0f64,
            0.0..=1.0f64,
        )
            .prop_map(|(k, r, alpha, beta, u)| {
                (
                    SystemParams {
                        a: k[0],
                        b: k[1],
                        c: k[2],
                        d: k[3],
                        e: k[4],
                        f: k[5],
                        r_h: r[0],
                        r_q: r[1],
                        r_m: r[2],
                    },
                    ControlParams { alpha, beta, u },
                )
            })
    }

    proptest! {
        #[test]
        fn field_is_affine(
            (p, c) in params(),
            x in (coord(), coord(), coord()),
            y in (coord(), coord(), coord()),
        ) {
            let x = StateVec::new(x.0, x.1, x.2);
            let y = StateVec::new(y.0, y.1, y.2);
            let lhs = field(&(x + y), &p, &c) + field(&StateVec::ZERO, &p, &c);
            let rhs = field(&x, &p, &c) + field(&y, &p, &c);
            let scale = 1.0 + lhs.norm() + rhs.norm();
            prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);
        }

        #[test]
        fn h_rate_ignores_q_and_m(
            (p, c) in params(),
            x in (coord(), coord(), coord()),
            dq in -1.0..1.0f64,
            dm in -1.0..1.0f64,
        ) {
            let base = StateVec::new(x.0, x.1, x.2);
            let moved = StateVec::new(x.0, x.1 + dq, x.2 + dm);
            prop_assert_eq!(field(&base, &p, &c).h, field(&moved, &p, &c).h);
        }

        #[test]
        fn closed_channel_decouples_m(
            (p, c) in params(),
            x in (coord(), coord(), coord()),
            dm in 0.0..100.0f64,
        ) {
            let c = c.with_u(0.0);
            let a = field(&StateVec::new(x.0, x.1, x.2), &p, &c);
            let b = field(&StateVec::new(x.0, x.1, x.2 + dm), &p, &c);
            prop_assert_eq!(a.q, b.q);
            prop_assert_eq!(a.m, b.m);
        }

        #[test]
        fn noise_is_beta_times_content((_, c) in params(), m in coord()) {
            let s = control_signals(&StateVec::new(0.0, 0.0, m), &c);
            prop_assert_eq!(s.noise, c.beta * s.content);
        }
    }
}
