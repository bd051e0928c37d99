//! The `edl` command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 configuration or validation
//! error, 4 numerical failure or output I/O failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::equilibrium::{analyze, classify_regime, EquilibriumError};
use crate::infodyn::{run_generations, GenerationState, InfoError};
use crate::integrate::{integrate, IntegrateError};
use crate::io::config::{parse_config, ConfigError, Scenario};
use crate::io::output::{self, Meta, NO_TIMESTAMP_ENV};
use crate::io::presets;
use crate::sweep::{compare_interventions, sweep_u, Increments, SimulationSettings, SweepError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "edl",
    version,
    about = "Human / data / model co-evolution dynamics lab"
)]
struct Cli {
    /// Omit the generated_at field from output headers (same as EDL_NO_TIMESTAMP=1).
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Scenario file (`key = value` lines).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a scenario and write the trajectory.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Also write trajectory.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Steady states across a grid of u, with the detected threshold.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Also write sweep.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Print the regime label of a scenario's trajectory.
    Classify {
        #[command(flatten)]
        config: ConfigArg,
        /// Also print the classifier evidence.
        #[arg(long)]
        verbose: bool,
    },
    /// Compare steady-state responses to raising r_H, r_Q and r_M.
    Intervene {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long = "dr-h", default_value_t = 0.0)]
        dr_h: f64,
        #[arg(long = "dr-q", default_value_t = 0.0)]
        dr_q: f64,
        #[arg(long = "dr-m", default_value_t = 0.0)]
        dr_m: f64,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run the discrete-distribution loop and write its diagnostics.
    Infodyn {
        #[command(flatten)]
        config: ConfigArg,
        /// Number of generations (overrides infodyn.generations).
        #[arg(long)]
        generations: Option<u32>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Also write infodyn.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Bundled scenarios.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Debug, Subcommand)]
enum PresetAction {
    /// List bundled scenario names.
    List,
    /// Print a bundled scenario file.
    Show { name: String },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("cannot read {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unknown preset `{0}` (see `edl presets list`)")]
    UnknownPreset(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::ReadConfig { .. } | CliError::Config { .. } | CliError::Invalid(_) => {
                EXIT_CONFIG
            }
            CliError::UnknownPreset(_) => EXIT_USAGE,
            CliError::Numerical(_) | CliError::Write { .. } => EXIT_NUMERICAL,
        }
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::Diverged { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<EquilibriumError> for CliError {
    fn from(e: EquilibriumError) -> Self {
        match e {
            EquilibriumError::Residual { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Integrate { ref source, .. }
                if matches!(source, IntegrateError::Diverged { .. }) =>
            {
                CliError::Numerical(e.to_string())
            }
            SweepError::Equilibrium { ref source, .. }
                if matches!(source, EquilibriumError::Residual { .. }) =>
            {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<InfoError> for CliError {
    fn from(e: InfoError) -> Self {
        match e {
            InfoError::Config(_) | InfoError::TooFewSymbols(_) => CliError::Invalid(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

fn load(arg: &ConfigArg) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(&arg.config).map_err(|source| CliError::ReadConfig {
        path: arg.config.clone(),
        source,
    })?;
    parse_config(&text).map_err(|source| CliError::Config {
        path: arg.config.clone(),
        source,
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, contents))
        .map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
    Ok(path)
}

struct Ctx<'a> {
    stdout: &'a mut dyn Write,
    timestamp: bool,
}

impl Ctx<'_> {
    fn say(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.stdout, "{}", line.as_ref());
    }
}

fn execute(cmd: Command, ctx: &mut Ctx) -> Result<(), CliError> {
    match cmd {
        Command::Simulate {
            config,
            out,
            format,
            svg,
        } => {
            let s = load(&config)?;
            let traj = integrate(&s.init, &s.params, &s.control, &s.integrator)?;
            let meta =
                Meta::new("simulate", &s, ctx.timestamp).with("clamp_events", traj.clamp_events);
            let path = match format {
                Format::Csv => write_file(
                    &out,
                    "trajectory.csv",
                    &output::trajectory_csv(&traj, &meta),
                )?,
                Format::Json => {
                    write_file(&out, "trajectory.json", &output::to_json(&traj, &meta))?
                }
            };
            ctx.say(format!("wrote {}", path.display()));
            if svg {
                let path = write_file(
                    &out,
                    "trajectory.svg",
                    &output::trajectory_svg(&traj, &meta),
                )?;
                ctx.say(format!("wrote {}", path.display()));
            }
        }
        Command::Sweep { config, out, svg } => {
            let s = load(&config)?;
            let spec = s.sweep_or_default();
            let grid = spec
                .grid
                .points()
                .map_err(|v| CliError::Invalid(v.to_string()))?;
            let sim = SimulationSettings {
                init: s.init,
                integrator: s.integrator,
                thresholds: s.classifier,
            };
            let result = sweep_u(
                &s.params,
                s.control.alpha,
                s.control.beta,
                &grid,
                spec.mode,
                &sim,
                spec.band_fraction,
            )?;
            let meta = output::threshold_meta(
                Meta::new("sweep", &s, ctx.timestamp),
                &result.threshold,
                spec.band_fraction,
            );
            let csv = write_file(&out, "sweep.csv", &output::sweep_csv(&result, &meta))?;
            let json = write_file(&out, "sweep.json", &output::to_json(&result, &meta))?;
            ctx.say(format!("wrote {}", csv.display()));
            ctx.say(format!("wrote {}", json.display()));
            if svg {
                let path = write_file(&out, "sweep.svg", &output::sweep_svg(&result, &meta))?;
                ctx.say(format!("wrote {}", path.display()));
            }
            match (result.threshold.u_c(), result.threshold.band()) {
                (Some(u_c), Some([lo, hi])) => ctx.say(format!("u_c = {u_c} band = [{lo}, {hi}]")),
                _ => ctx.say("u_c = none (no curvature in Q*)"),
            }
        }
        Command::Classify { config, verbose } => {
            let s = load(&config)?;
            let traj = integrate(&s.init, &s.params, &s.control, &s.integrator)?;
            let label = classify_regime(&traj, &s.params, &s.control, &s.classifier)
                .map_err(|e| CliError::Invalid(e.to_string()))?;
            ctx.say(label.label.to_string());
            if verbose {
                let ev = &label.evidence;
                ctx.say(format!("initial {}", ev.initial));
                ctx.say(format!("final {}", ev.terminal));
                ctx.say(format!("residual {:e}", ev.residual));
                ctx.say(format!("relative tail slopes {:?}", ev.relative_slopes));
                if let Ok(report) = analyze(&s.params, &s.control) {
                    ctx.say(format!(
                        "fixed point {} ({})",
                        report.fixed_point, report.stability
                    ));
                }
            }
        }
        Command::Intervene {
            config,
            dr_h,
            dr_q,
            dr_m,
            json,
        } => {
            let s = load(&config)?;
            let inc = Increments {
                r_h: dr_h,
                r_q: dr_q,
                r_m: dr_m,
            };
            let report = compare_interventions(&s.params, &s.control, &inc)?;
            if json {
                let meta = Meta::new("intervene", &s, ctx.timestamp);
                let _ = ctx
                    .stdout
                    .write_all(output::to_json(&report, &meta).as_bytes());
            } else {
                let b = report.baseline;
                ctx.say(format!(
                    "{:<9} {:>10} {:>24} {:>24} {:>24}",
                    "channel", "increment", "H*", "Q*", "M*"
                ));
                ctx.say(format!(
                    "{:<9} {:>10} {:>24} {:>24} {:>24}",
                    "baseline", "", b.h, b.q, b.m
                ));
                for e in &report.effects {
                    let x = e.steady_state;
                    ctx.say(format!(
                        "{:<9} {:>10} {:>24} {:>24} {:>24}",
                        e.channel, e.increment, x.h, x.q, x.m
                    ));
                    let d = e.delta;
                    ctx.say(format!(
                        "{:<9} {:>10} {:>+24} {:>+24} {:>+24}",
                        "  delta", "", d.h, d.q, d.m
                    ));
                }
            }
        }
        Command::Infodyn {
            config,
            generations,
            out,
            format,
            svg,
        } => {
            let s = load(&config)?;
            let spec = s.infodyn_or_default();
            let cfg = spec.resolve(s.control.u);
            cfg.validate()
                .map_err(|v| CliError::Invalid(v.to_string()))?;
            let n = generations.unwrap_or(spec.generations);
            let init = GenerationState::initial(spec.world()?, &cfg)?;
            let rows = run_generations(&init, &cfg, n)?;
            let meta = Meta::new("infodyn", &s, ctx.timestamp)
                .with("generations", n)
                .with("resolved.u", cfg.u)
                .with("resolved.lambda", cfg.lambda)
                .with("resolved.tau", cfg.tau);
            let path = match format {
                Format::Csv => write_file(&out, "infodyn.csv", &output::infodyn_csv(&rows, &meta))?,
                Format::Json => write_file(&out, "infodyn.json", &output::to_json(&rows, &meta))?,
            };
            ctx.say(format!("wrote {}", path.display()));
            if svg {
                let path = write_file(&out, "infodyn.svg", &output::infodyn_svg(&rows, &meta))?;
                ctx.say(format!("wrote {}", path.display()));
            }
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for p in presets::PRESETS {
                    let desc = parse_config(p.text)
                        .map(|s| s.description)
                        .unwrap_or_default();
                    ctx.say(format!("{:<14} {}", p.name, desc));
                }
            }
            PresetAction::Show { name } => {
                let p = presets::find(&name).ok_or(CliError::UnknownPreset(name))?;
                let _ = ctx.stdout.write_all(p.text.as_bytes());
            }
        },
    }
    Ok(())
}

fn env_no_timestamp() -> bool {
    std::env::var(NO_TIMESTAMP_ENV)
        .map(|v| v == "1")
        .unwrap_or(false)
}

/// Runs one invocation and returns the process exit code. Diagnostics go to
/// `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let mut ctx = Ctx {
        stdout,
        timestamp: !(cli.no_timestamp || env_no_timestamp()),
    };
    match execute(cli.command, &mut ctx) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code()
        }
    }
}
