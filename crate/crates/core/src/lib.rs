//! Numerical laboratory for a coupled human cognition / data quality /
//! model capability feedback system.
//!
//! * [`dynamics`]: state, parameters and the vector field.
//! * [`integrate`]: fixed-step Euler / RK4 integration.
//! * [`equilibrium`]: closed-form fixed point, Jacobian spectrum and
//!   trajectory regime labels.
//! * [`sweep`]: steady states across the offloading degree `u`, threshold
//!   detection and intervention comparisons.
//! * [`infodyn`]: exact discrete-distribution loop with entropy, divergence
//!   and mutual-information diagnostics.
//! * [`io`] and [`cli`]: scenario files, presets, CSV/JSON/SVG output and the
//!   `edl` command line.

pub mod cli;
pub mod dynamics;
pub mod equilibrium;
pub mod infodyn;
pub mod integrate;
pub mod io;
pub mod sweep;

pub use dynamics::{
    control_signals, derivative, validate, ControlParams, ControlSignals, StateVec, SystemParams,
};
pub use equilibrium::{
    analyze, classify_regime, classify_stability, eigenvalues, fixed_point, jacobian,
    ClassifierThresholds, EquilibriumReport, Regime, RegimeLabel, Stability,
};
pub use infodyn::{Dist, GenerationMetrics, GenerationState, InfoConfig};
pub use integrate::{integrate, IntegratorConfig, Method, Trajectory};
pub use io::config::Scenario;
pub use sweep::{detect_threshold, sweep_u, SweepMode, SweepResult, Threshold};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
