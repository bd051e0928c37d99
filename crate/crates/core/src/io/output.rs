//! CSV, JSON and SVG writers.
//!
//! Every artifact starts with a metadata header: tool version, the fully
//! resolved scenario (in config syntax) and any result-level values such as
//! the detected threshold. CSV headers are `#`-prefixed comment lines ahead of
//! the column row; JSON carries them under `"meta"`; SVG under `<metadata>`.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::StateVec;
use crate::infodyn::GenerationMetrics;
use crate::integrate::Trajectory;
use crate::io::config::Scenario;
use crate::sweep::{SweepResult, Threshold};

/// Environment variable equivalent to `--no-timestamp`.
pub const NO_TIMESTAMP_ENV: &str = "EDL_NO_TIMESTAMP";

pub const TRAJECTORY_COLUMNS: &str = "t,H,Q,M,A,S";
pub const SWEEP_COLUMNS: &str = "u,H_star,Q_star,M_star,max_re_lambda,stability,regime";
pub const INFODYN_COLUMNS: &str =
    "gen,H_human,H_model,kl_model_human,kl_model_world,tail_support,mi_consecutive";

/// Self-describing header shared by all output formats.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub command: String,
    pub scenario: Scenario,
    /// Extra `key = value` pairs (thresholds, detected values, …).
    pub extra: Vec<(String, String)>,
    /// Seconds since the Unix epoch; `None` when suppressed.
    pub timestamp: Option<u64>,
}

impl Meta {
    pub fn new(command: &str, scenario: &Scenario, with_timestamp: bool) -> Self {
        let timestamp = with_timestamp.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Self {
            command: command.into(),
            scenario: scenario.clone(),
            extra: Vec::new(),
            timestamp,
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.into(), value.to_string()));
        self
    }

    fn lines(&self) -> Vec<String> {
        let mut out = vec![format!("edl {} {}", crate::VERSION, self.command)];
        out.extend(self.scenario.to_config_string().lines().map(str::to_string));
        out.extend(self.extra.iter().map(|(k, v)| format!("{k} = {v}")));
        if let Some(ts) = self.timestamp {
            out.push(format!("generated_at = {ts}"));
        }
        out
    }

    fn to_json(&self) -> Value {
        let mut m = serde_json::Map::new();
        m.insert("tool".into(), json!("edl"));
        m.insert("version".into(), json!(crate::VERSION));
        m.insert("command".into(), json!(self.command));
        m.insert("config".into(), json!(self.scenario.to_config_string()));
        m.insert(
            "scenario".into(),
            serde_json::to_value(&self.scenario).expect("scenario serializes"),
        );
        for (k, v) in &self.extra {
            m.insert(k.clone(), json!(v));
        }
        if let Some(ts) = self.timestamp {
            m.insert("generated_at".into(), json!(ts));
        }
        Value::Object(m)
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_header(meta: &Meta, columns: &str) -> String {
    let mut out = String::new();
    for l in meta.lines() {
        let _ = writeln!(out, "# {l}");
    }
    out.push_str(columns);
    out.push('\n');
    out
}

pub fn trajectory_csv(traj: &Trajectory, meta: &Meta) -> String {
    let mut out = csv_header(meta, TRAJECTORY_COLUMNS);
    for ((t, x), s) in traj.times.iter().zip(&traj.states).zip(&traj.signals) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            real(*t),
            real(x.h),
            real(x.q),
            real(x.m),
            real(s.content),
            real(s.noise)
        );
    }
    out
}

pub fn sweep_csv(sweep: &SweepResult, meta: &Meta) -> String {
    let mut out = csv_header(meta, SWEEP_COLUMNS);
    for (i, (u, x)) in sweep.u_grid.iter().zip(&sweep.steady_states).enumerate() {
        let e = &sweep.eigen[i];
        let regime = sweep
            .regimes
            .as_ref()
            .map(|r| r[i].to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            real(*u),
            real(x.h),
            real(x.q),
            real(x.m),
            real(e.max_re),
            e.stability,
            regime
        );
    }
    out
}

pub fn infodyn_csv(rows: &[GenerationMetrics], meta: &Meta) -> String {
    let mut out = csv_header(meta, INFODYN_COLUMNS);
    for r in rows {
        let mi = r.mi_consecutive.map(real).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.generation,
            real(r.entropy_human),
            real(r.entropy_model),
            real(r.kl_model_human),
            real(r.kl_model_world),
            r.tail_support,
            mi
        );
    }
    out
}

/// `{"meta": …, "result": …}` with lexicographically ordered keys.
pub fn to_json<T: Serialize>(result: &T, meta: &Meta) -> String {
    let doc = json!({
        "meta": meta.to_json(),
        "result": serde_json::to_value(result).expect("result serializes"),
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("value serializes");
    s.push('\n');
    s
}

/// Sweep metadata: threshold and band, or an explicit "none".
pub fn threshold_meta(meta: Meta, t: &Threshold, band_fraction: f64) -> Meta {
    let meta = meta.with("band_fraction", crate::io::config::Num(band_fraction));
    match t {
        Threshold::Detected {
            u_c,
            band,
            curvature,
            ..
        } => meta
            .with("u_c", real(*u_c))
            .with("band", format!("{},{}", real(band[0]), real(band[1])))
            .with("max_curvature", real(*curvature)),
        Threshold::None => meta.with("u_c", "none"),
    }
}

// ---- SVG -------------------------------------------------------------------

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

#[derive(Default)]
pub struct Decorations {
    /// Dashed vertical marker at this x.
    pub marker: Option<f64>,
    /// Shaded x-interval.
    pub band: Option<[f64; 2]>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * (1.0 + hi.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn tick(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{x:.2e}")
    } else {
        let s = format!("{x:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.into()
        }
    }
}

/// Static line chart with linear axes and a legend, one polyline per series.
pub fn line_chart(
    title: &str,
    x_label: &str,
    series: &[Series],
    deco: &Decorations,
    meta: &Meta,
) -> String {
    let (x0, x1) = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (mut y0, mut y1) = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    if y0 > 0.0 && y0 < 0.25 * y1 {
        y0 = 0.0;
    }
    let pad = 0.05 * (y1 - y0);
    y1 += pad;
    if y0 != 0.0 {
        y0 -= pad;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    out.push_str("<metadata>\n");
    for l in meta.lines() {
        let _ = writeln!(out, "{}", escape(&l));
    }
    out.push_str("</metadata>\n");
    let _ = writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        LEFT + pw / 2.0,
        escape(title)
    );

    if let Some([lo, hi]) = deco.band {
        let (a, b) = (sx(lo), sx(hi));
        let w = (b - a).max(2.0);
        let _ = writeln!(out, "<rect x=\"{:.2}\" y=\"{TOP}\" width=\"{w:.2}\" height=\"{ph}\" fill=\"#999999\" fill-opacity=\"0.2\"/>", a - if b - a < 2.0 { 1.0 } else { 0.0 });
    }

    // axes and ticks
    let _ = writeln!(
        out,
        "<line x1=\"{LEFT}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        TOP + ph,
        LEFT + pw,
        TOP + ph
    );
    let _ = writeln!(
        out,
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{}\" stroke=\"black\"/>",
        TOP + ph
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            sx(xv),
            TOP + ph + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            LEFT - 6.0,
            sy(yv) + 4.0,
            tick(yv)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{LEFT}\" y1=\"{:.2}\" x2=\"{}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>",
            sy(yv),
            LEFT + pw,
            sy(yv)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );

    if let Some(m) = deco.marker {
        let x = sx(m);
        let _ = writeln!(out, "<line x1=\"{x:.2}\" y1=\"{TOP}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"black\" stroke-dasharray=\"6,4\"/>", TOP + ph);
    }

    for s in series {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\" points=\"{}\"><title>{}</title></polyline>",
            s.color,
            pts.join(" "),
            escape(s.name)
        );
    }

    for (i, s) in series.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let x = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            out,
            "<line x1=\"{x}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{}\" stroke-width=\"2\"/>",
            x + 24.0,
            s.color
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\">{}</text>",
            x + 30.0,
            y + 4.0,
            escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

pub fn trajectory_svg(traj: &Trajectory, meta: &Meta) -> String {
    let pick: [fn(&StateVec) -> f64; 3] = [|x| x.h, |x| x.q, |x| x.m];
    let series: Vec<Series> = ["H", "Q", "M"]
        .iter()
        .zip(pick)
        .zip(COLORS)
        .map(|((name, f), color)| Series {
            name,
            color,
            points: traj
                .times
                .iter()
                .zip(&traj.states)
                .map(|(t, x)| (*t, f(x)))
                .collect(),
        })
        .collect();
    let title = format!("{}: trajectories", meta.scenario.name);
    line_chart(&title, "t", &series, &Decorations::default(), meta)
}

pub fn sweep_svg(sweep: &SweepResult, meta: &Meta) -> String {
    let pick: [fn(&StateVec) -> f64; 3] = [|x| x.h, |x| x.q, |x| x.m];
    let series: Vec<Series> = ["H*", "Q*", "M*"]
        .iter()
        .zip(pick)
        .zip(COLORS)
        .map(|((name, f), color)| Series {
            name,
            color,
            points: sweep
                .u_grid
                .iter()
                .zip(&sweep.steady_states)
                .map(|(u, x)| (*u, f(x)))
                .collect(),
        })
        .collect();
    let deco = Decorations {
        marker: sweep.threshold.u_c(),
        band: sweep.threshold.band(),
    };
    let title = format!("{}: steady state vs u", meta.scenario.name);
    line_chart(&title, "u (AI dependence)", &series, &deco, meta)
}

pub fn infodyn_svg(rows: &[GenerationMetrics], meta: &Meta) -> String {
    let g = |f: fn(&GenerationMetrics) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter()
            .filter_map(|r| f(r).map(|v| (r.generation as f64, v)))
            .collect()
    };
    let series = vec![
        Series {
            name: "H(human)",
            color: COLORS[0],
            points: g(|r| Some(r.entropy_human)),
        },
        Series {
            name: "H(model)",
            color: "#9467bd",
            points: g(|r| Some(r.entropy_model)),
        },
        Series {
            name: "KL(model|human)",
            color: COLORS[1],
            points: g(|r| Some(r.kl_model_human)),
        },
        Series {
            name: "KL(model|world)",
            color: COLORS[2],
            points: g(|r| Some(r.kl_model_world)),
        },
        Series {
            name: "I(H_t-1;H_t)",
            color: "#ff7f0e",
            points: g(|r| r.mi_consecutive),
        },
    ];
    let title = format!("{}: information diagnostics (nats)", meta.scenario.name);
    line_chart(&title, "generation", &series, &Decorations::default(), meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [
            0.1,
            1.0 / 3.0,
            6.02214076e23,
            -1e-300,
            0.0,
            5e-324,
            f64::MAX,
        ] {
            let s = real(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let digits = s
                .split('e')
                .next()
                .unwrap()
                .chars()
                .filter(char::is_ascii_digit)
                .count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn ticks_are_short() {
        assert_eq!(tick(0.5), "0.5");
        assert_eq!(tick(2.0), "2");
        assert_eq!(tick(0.0), "0");
        assert_eq!(tick(1e-6), "1.00e-6");
    }
}
