//! Scenario files: flat `key = value` lines with `#` comments.
//!
//! Model parameters and controls use bare keys (`a`, …, `r_H`, `alpha`,
//! `u`); everything else is namespaced with a dotted prefix
//! (`init.H`, `integrator.h`, `classifier.eps_eq`, `sweep.u_step`,
//! `infodyn.K`, …). Unknown or repeated keys are errors; missing keys take
//! their defaults. See `docs/config.md` for the full schema.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{validate, ControlParams, StateVec, SystemParams, Violations};
use crate::equilibrium::ClassifierThresholds;
use crate::infodyn::{
    default_tau, Dist, InfoConfig, InfoError, DEFAULT_EPSILON_TAIL, DEFAULT_KAPPA,
    DEFAULT_SMOOTHING,
};
use crate::integrate::IntegratorConfig;
use crate::sweep::{uniform_grid, validate_grid, SweepMode, DEFAULT_BAND_FRACTION};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` already set on line {first}")]
    Duplicate {
        line: usize,
        key: String,
        first: usize,
    },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(Violations),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Range { start: f64, stop: f64, step: f64 },
    Explicit { points: Vec<f64> },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Range {
            start: 0.05,
            stop: 1.0,
            step: 0.01,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>, Violations> {
        match self {
            GridSpec::Range { start, stop, step } => uniform_grid(*start, *stop, *step),
            GridSpec::Explicit { points } => Ok(points.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepSpec {
    pub grid: GridSpec,
    pub mode: SweepMode,
    pub band_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoSpec {
    /// Number of symbols.
    pub k: usize,
    pub zipf_exponent: f64,
    /// Falls back to the scenario's `u`.
    pub u: Option<f64>,
    /// Falls back to `u`.
    pub lambda: Option<f64>,
    /// Falls back to `1 - 0.8·u`.
    pub tau: Option<f64>,
    pub epsilon_tail: f64,
    pub kappa: f64,
    pub smoothing: f64,
    pub generations: u32,
}

impl Default for InfoSpec {
    fn default() -> Self {
        Self {
            k: 64,
            zipf_exponent: 1.0,
            u: None,
            lambda: None,
            tau: None,
            epsilon_tail: DEFAULT_EPSILON_TAIL,
            kappa: DEFAULT_KAPPA,
            smoothing: DEFAULT_SMOOTHING,
            generations: 20,
        }
    }
}

impl InfoSpec {
    pub fn resolve(&self, scenario_u: f64) -> InfoConfig {
        let u = self.u.unwrap_or(scenario_u);
        InfoConfig {
            u,
            lambda: self.lambda.unwrap_or(u),
            tau: self.tau.unwrap_or_else(|| default_tau(u)),
            epsilon_tail: self.epsilon_tail,
            kappa: self.kappa,
            smoothing: self.smoothing,
        }
    }

    pub fn world(&self) -> Result<Dist, InfoError> {
        Dist::zipf(self.k, self.zipf_exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub params: SystemParams,
    pub control: ControlParams,
    pub init: StateVec,
    pub integrator: IntegratorConfig,
    pub classifier: ClassifierThresholds,
    pub sweep: Option<SweepSpec>,
    pub infodyn: Option<InfoSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            description: String::new(),
            params: SystemParams::unit(),
            control: ControlParams::default(),
            init: StateVec::new(1.0, 1.0, 1.0),
            integrator: IntegratorConfig::default(),
            classifier: ClassifierThresholds::default(),
            sweep: None,
            infodyn: None,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), Violations> {
        let mut v = Violations::default();
        if self.name.trim().is_empty() {
            v.push("name", "must not be empty");
        }
        if let Err(e) = validate(&self.params, &self.control) {
            v.extend(e);
        }
        if let Err(e) = self.init.check() {
            for mut x in e.0 {
                x.field = format!("init.{}", x.field);
                v.0.push(x);
            }
        }
        if let Err(e) = self.integrator.validate() {
            v.extend(e);
        }
        if let Err(e) = self.classifier.validate() {
            v.extend(e);
        }
        if let Some(s) = &self.sweep {
            match s.grid.points() {
                Ok(points) => {
                    if let Err(e) = validate_grid(&points) {
                        v.extend(e);
                    }
                }
                Err(e) => v.extend(e),
            }
            if !(s.band_fraction > 0.0 && s.band_fraction <= 1.0) {
                v.push("sweep.band_fraction", "must lie in (0,1]");
            }
        }
        if let Some(info) = &self.infodyn {
            if info.k < 2 {
                v.push("infodyn.K", "must be >= 2");
            }
            if !(info.zipf_exponent.is_finite() && info.zipf_exponent >= 0.0) {
                v.push("infodyn.zipf_exponent", "must be >= 0");
            }
            if info.generations < 2 {
                v.push("infodyn.generations", "must be >= 2");
            }
            if let Err(e) = info.resolve(self.control.u).validate() {
                v.extend(e);
            }
        }
        v.into_result()
    }

    /// The sweep section, or the default sweep when the scenario has none.
    pub fn sweep_or_default(&self) -> SweepSpec {
        self.sweep.clone().unwrap_or(SweepSpec {
            band_fraction: DEFAULT_BAND_FRACTION,
            ..SweepSpec::default()
        })
    }

    pub fn infodyn_or_default(&self) -> InfoSpec {
        self.infodyn.clone().unwrap_or_default()
    }

    /// Canonical text form; `parse_config(s.to_config_string())` returns `s`.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("name", &self.name);
        kv("description", &self.description);
        let p = &self.params;
        for (k, x) in [
            ("a", p.a),
            ("b", p.b),
            ("c", p.c),
            ("d", p.d),
            ("e", p.e),
            ("f", p.f),
            ("r_H", p.r_h),
            ("r_Q", p.r_q),
            ("r_M", p.r_m),
            ("alpha", self.control.alpha),
            ("beta", self.control.beta),
            ("u", self.control.u),
            ("init.H", self.init.h),
            ("init.Q", self.init.q),
            ("init.M", self.init.m),
        ] {
            kv(k, &Num(x));
        }
        let ic = &self.integrator;
        kv("integrator.method", &ic.method);
        kv("integrator.h", &Num(ic.step));
        kv("integrator.horizon", &Num(ic.horizon));
        kv("integrator.clamp", &ic.clamp_nonneg);
        kv("integrator.max_steps", &ic.max_steps);
        kv("integrator.stride", &ic.stride);
        let th = &self.classifier;
        for (k, x) in [
            ("classifier.eps_eq", th.eps_eq),
            ("classifier.s_conv", th.s_conv),
            ("classifier.s_min", th.s_min),
            ("classifier.delta", th.delta),
            ("classifier.tail_fraction", th.tail_fraction),
        ] {
            kv(k, &Num(x));
        }
        if let Some(s) = &self.sweep {
            match &s.grid {
                GridSpec::Range { start, stop, step } => {
                    kv("sweep.u_start", &Num(*start));
                    kv("sweep.u_stop", &Num(*stop));
                    kv("sweep.u_step", &Num(*step));
                }
                GridSpec::Explicit { points } => {
                    let list: Vec<String> = points.iter().map(|x| Num(*x).to_string()).collect();
                    kv("sweep.grid", &list.join(", "));
                }
            }
            kv("sweep.mode", &s.mode);
            kv("sweep.band_fraction", &Num(s.band_fraction));
        }
        if let Some(i) = &self.infodyn {
            kv("infodyn.K", &i.k);
            kv("infodyn.zipf_exponent", &Num(i.zipf_exponent));
            for (k, x) in [
                ("infodyn.u", i.u),
                ("infodyn.lambda", i.lambda),
                ("infodyn.tau", i.tau),
            ] {
                if let Some(x) = x {
                    kv(k, &Num(x));
                }
            }
            kv("infodyn.epsilon_tail", &Num(i.epsilon_tail));
            kv("infodyn.kappa", &Num(i.kappa));
            kv("infodyn.smoothing", &Num(i.smoothing));
            kv("infodyn.generations", &i.generations);
        }
        out
    }
}

/// Shortest round-trip decimal, switching to exponent notation for very
/// small or large magnitudes.
pub struct Num(pub f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || (1e-4..1e15).contains(&a) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}

fn strip_comment(raw: &str) -> &str {
    match raw.find('#') {
        Some(i) => &raw[..i],
        None => raw,
    }
}

fn is_text_key(key: &str) -> bool {
    key == "name" || key == "description"
}

/// Parses and validates a scenario.
pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    let mut s = Scenario::default();
    let mut seen: Vec<(String, usize)> = Vec::new();
    let mut sweep: Option<SweepSpec> = None;
    let mut range: [Option<f64>; 3] = [None; 3];
    let mut explicit: Option<(Vec<f64>, usize)> = None;
    let mut info: Option<InfoSpec> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{trimmed}`"),
            });
        };
        let key = key.trim();
        let value = if is_text_key(key) {
            value.trim()
        } else {
            strip_comment(value).trim()
        };
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                message: "empty key".into(),
            });
        }
        if let Some((_, first)) = seen.iter().find(|(k, _)| k == key) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.into(),
                first: *first,
            });
        }
        seen.push((key.to_string(), line));

        let bad = |message: String| ConfigError::Value {
            line,
            key: key.into(),
            message,
        };
        let num = || -> Result<f64, ConfigError> {
            value
                .parse::<f64>()
                .map_err(|_| bad(format!("`{value}` is not a number")))
        };
        let int = || -> Result<u64, ConfigError> {
            value
                .parse::<u64>()
                .map_err(|_| bad(format!("`{value}` is not a nonnegative integer")))
        };

        match key {
            "name" => s.name = value.to_string(),
            "description" => s.description = value.to_string(),
            "a" => s.params.a = num()?,
            "b" => s.params.b = num()?,
            "c" => s.params.c = num()?,
            "d" => s.params.d = num()?,
            "e" => s.params.e = num()?,
            "f" => s.params.f = num()?,
            "r_H" => s.params.r_h = num()?,
            "r_Q" => s.params.r_q = num()?,
            "r_M" => s.params.r_m = num()?,
            "alpha" => s.control.alpha = num()?,
            "beta" => s.control.beta = num()?,
            "u" => s.control.u = num()?,
            "init.H" => s.init.h = num()?,
            "init.Q" => s.init.q = num()?,
            "init.M" => s.init.m = num()?,
            "integrator.method" => s.integrator.method = value.parse().map_err(bad)?,
            "integrator.h" => s.integrator.step = num()?,
            "integrator.horizon" => s.integrator.horizon = num()?,
            "integrator.clamp" => {
                s.integrator.clamp_nonneg = match value {
                    "true" | "on" | "1" => true,
                    "false" | "off" | "0" => false,
                    _ => return Err(bad(format!("`{value}` is not a boolean"))),
                }
            }
            "integrator.max_steps" => s.integrator.max_steps = int()?,
            "integrator.stride" => s.integrator.stride = int()? as usize,
            "classifier.eps_eq" => s.classifier.eps_eq = num()?,
            "classifier.s_conv" => s.classifier.s_conv = num()?,
            "classifier.s_min" => s.classifier.s_min = num()?,
            "classifier.delta" => s.classifier.delta = num()?,
            "classifier.tail_fraction" => s.classifier.tail_fraction = num()?,
            k if k.starts_with("sweep.") => {
                let sw = sweep.get_or_insert_with(|| SweepSpec {
                    band_fraction: DEFAULT_BAND_FRACTION,
                    ..SweepSpec::default()
                });
                match k {
                    "sweep.u_start" => range[0] = Some(num()?),
                    "sweep.u_stop" => range[1] = Some(num()?),
                    "sweep.u_step" => range[2] = Some(num()?),
                    "sweep.grid" => {
                        let points = value
                            .split(',')
                            .map(|t| t.trim().parse::<f64>())
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(
                                |_| bad("expected a comma-separated list of numbers".into()),
                            )?;
                        explicit = Some((points, line));
                    }
                    "sweep.mode" => sw.mode = value.parse().map_err(bad)?,
                    "sweep.band_fraction" => sw.band_fraction = num()?,
                    _ => {
                        return Err(ConfigError::UnknownKey {
                            line,
                            key: k.into(),
                        })
                    }
                }
            }
            k if k.starts_with("infodyn.") => {
                let inf = info.get_or_insert_with(InfoSpec::default);
                match k {
                    "infodyn.K" => inf.k = int()? as usize,
                    "infodyn.zipf_exponent" => inf.zipf_exponent = num()?,
                    "infodyn.u" => inf.u = Some(num()?),
                    "infodyn.lambda" => inf.lambda = Some(num()?),
                    "infodyn.tau" => inf.tau = Some(num()?),
                    "infodyn.epsilon_tail" => inf.epsilon_tail = num()?,
                    "infodyn.kappa" => inf.kappa = num()?,
                    "infodyn.smoothing" => inf.smoothing = num()?,
                    "infodyn.generations" => {
                        inf.generations =
                            u32::try_from(int()?).map_err(|_| bad("too large".into()))?
                    }
                    _ => {
                        return Err(ConfigError::UnknownKey {
                            line,
                            key: k.into(),
                        })
                    }
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.into(),
                })
            }
        }
    }

    if let Some(sw) = sweep.as_mut() {
        match (explicit, range) {
            (Some((_, line)), r) if r.iter().any(Option::is_some) => {
                return Err(ConfigError::Value {
                    line,
                    key: "sweep.grid".into(),
                    message: "cannot be combined with sweep.u_start/u_stop/u_step".into(),
                })
            }
            (Some((points, _)), _) => sw.grid = GridSpec::Explicit { points },
            (None, [start, stop, step]) => {
                let GridSpec::Range {
                    start: s0,
                    stop: s1,
                    step: s2,
                } = GridSpec::default()
                else {
                    unreachable!()
                };
                sw.grid = GridSpec::Range {
                    start: start.unwrap_or(s0),
                    stop: stop.unwrap_or(s1),
                    step: step.unwrap_or(s2),
                };
            }
        }
    }
    s.sweep = sweep;
    s.infodyn = info;
    s.validate().map_err(ConfigError::Invalid)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let s = parse_config("u = 0.5\n").unwrap();
        assert_eq!(
            s,
            Scenario {
                control: ControlParams {
                    u: 0.5,
                    ..ControlParams::default()
                },
                ..Scenario::default()
            }
        );
    }

    #[test]
    fn unknown_key_names_line() {
        let err = parse_config("uu = 0.5\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 1,
                key: "uu".into()
            }
        );
        let err = parse_config("# header\n\nsweep.u_begin = 0.1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 3, .. }));
    }

    #[test]
    fn duplicates_and_syntax() {
        assert!(matches!(
            parse_config("u = 0.5\nu = 0.6\n").unwrap_err(),
            ConfigError::Duplicate {
                line: 2,
                first: 1,
                ..
            }
        ));
        assert!(matches!(
            parse_config("u 0.5\n").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
        assert!(matches!(
            parse_config("u = half\n").unwrap_err(),
            ConfigError::Value { line: 1, .. }
        ));
    }

    #[test]
    fn comments_are_ignored() {
        let s = parse_config("# scenario\nu = 0.25   # offloading\ndescription = keeps # inside\n")
            .unwrap();
        assert_eq!(s.control.u, 0.25);
        assert_eq!(s.description, "keeps # inside");
    }

    #[test]
    fn validation_errors_forwarded() {
        match parse_config("integrator.h = 0\nb = -1\n").unwrap_err() {
            ConfigError::Invalid(v) => {
                let fields: Vec<&str> = v.iter().map(|x| x.field.as_str()).collect();
                assert_eq!(fields, ["b", "integrator.h"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_in_sweep_grid_rejected() {
        let err =
            parse_config("sweep.u_start = 0\nsweep.u_stop = 1\nsweep.u_step = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("singular"), "{err}");
        let err = parse_config("sweep.grid = 0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7\n").unwrap_err();
        assert!(err.to_string().contains("singular"), "{err}");
    }

    #[test]
    fn grid_forms_are_exclusive() {
        let err = parse_config("sweep.grid = 0.1, 0.2\nsweep.u_step = 0.1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Value { line: 1, .. }));
    }

    #[test]
    fn round_trip_with_every_section() {
        let text = "name = full\ndescription = every section\nr_M = 1e-7\nu = 0.3\ninit.Q = 2.5\n\
                    integrator.method = rk4\nintegrator.clamp = off\nsweep.grid = 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8\n\
                    sweep.mode = simulated\ninfodyn.K = 12\ninfodyn.tau = 0.5\n";
        let s = parse_config(text).unwrap();
        let back = parse_config(&s.to_config_string()).unwrap();
        assert_eq!(s, back);
        assert_eq!(s.to_config_string(), back.to_config_string());
        assert_eq!(s.infodyn.as_ref().unwrap().resolve(0.3).lambda, 0.3);
    }

    #[test]
    fn numbers_print_round_trip() {
        for x in [
            0.0,
            1.0,
            0.1,
            1e-12,
            1e-4,
            123456.789,
            1e300,
            -2.5e-9,
            0.06000000000000001,
        ] {
            assert_eq!(Num(x).to_string().parse::<f64>().unwrap(), x);
        }
        assert_eq!(Num(1e-12).to_string(), "1e-12");
        assert_eq!(Num(0.01).to_string(), "0.01");
    }
}
