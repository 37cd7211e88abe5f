//! `fopid`: FOPID design for delayed fractional-order processes.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use fopid_core::fracnum::{OustaloupConfig, Realization};
use fopid_core::simkit::{Disturbance, Scenario};
use fopid_core::{DelayMethod, Error, NioptdPlant};

pub const OUT_DIR_ENV: &str = "FOPID_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "fopid",
    version,
    about = "LQR-based FOPID tuning for delayed fractional-order processes"
)]
pub struct Cli {
    /// key = value file; keys are flag names, flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for CSV output.
    #[arg(long = "out-dir", global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Open-loop step response, optionally with a Bode diagram.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Step(StepArgs),
    /// Closed-loop response of one controller.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// NSGA-II search over LQR weights and orders.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Design(DesignArgs),
    /// Evaluate the polynomial tuning rule.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Rule(RuleArgs),
    /// Indices of one controller over a grid of delays and lags.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// LQR gains for given weights.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Gains(GainsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PlantArgs {
    #[arg(long = "K", default_value_t = 1.0)]
    pub gain: f64,
    #[arg(long = "L", default_value_t = 0.5)]
    pub delay: f64,
    #[arg(long = "T", default_value_t = 2.0)]
    pub time_constant: f64,
    #[arg(long, default_value_t = 1.5)]
    pub alpha: f64,
}

impl PlantArgs {
    pub fn plant(&self) -> fopid_core::Result<NioptdPlant> {
        NioptdPlant::new(self.gain, self.delay, self.time_constant, self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RealizationKind {
    Oustaloup,
    Gl,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(long, default_value_t = 1.0)]
    pub setpoint: f64,
    #[arg(long, default_value_t = 100.0)]
    pub horizon: f64,
    /// Sample time h.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// Add an input step disturbance.
    #[arg(long)]
    pub disturbance: bool,
    #[arg(long = "dist-time", default_value_t = Disturbance::default().time)]
    pub dist_time: f64,
    #[arg(long = "dist-magnitude", default_value_t = Disturbance::default().magnitude)]
    pub dist_magnitude: f64,
    #[arg(long, value_enum, default_value_t = RealizationKind::Oustaloup)]
    pub realization: RealizationKind,
    #[arg(long = "band-low", default_value_t = OustaloupConfig::default().band.0)]
    pub band_low: f64,
    #[arg(long = "band-high", default_value_t = OustaloupConfig::default().band.1)]
    pub band_high: f64,
    #[arg(long = "oustaloup-order", default_value_t = OustaloupConfig::default().order)]
    pub oustaloup_order: usize,
    /// Grünwald–Letnikov memory in samples (full history if omitted).
    #[arg(long = "gl-memory")]
    pub gl_memory: Option<usize>,
}

impl ScenarioArgs {
    pub fn realization(&self) -> Realization {
        match self.realization {
            RealizationKind::Oustaloup => Realization::Oustaloup(OustaloupConfig {
                band: (self.band_low, self.band_high),
                order: self.oustaloup_order,
            }),
            RealizationKind::Gl => Realization::GrunwaldLetnikov {
                memory: self.gl_memory,
            },
        }
    }

    pub fn scenario(&self) -> fopid_core::Result<Scenario> {
        let s = Scenario {
            setpoint: self.setpoint,
            horizon: self.horizon,
            step: self.step,
            disturbance: self.disturbance.then_some(Disturbance {
                time: self.dist_time,
                magnitude: self.dist_magnitude,
            }),
            realization: self.realization(),
        };
        s.validate()?;
        if let Realization::Oustaloup(cfg) = s.realization {
            cfg.validate()?;
        }
        Ok(s)
    }
}

/// Either explicit gains or LQR weights plus a delay method.
#[derive(Debug, Clone, Args)]
pub struct ControllerArgs {
    #[arg(long = "Kp")]
    pub kp: Option<f64>,
    #[arg(long = "Ki")]
    pub ki: Option<f64>,
    #[arg(long = "Kd")]
    pub kd: Option<f64>,
    #[arg(long = "Q1")]
    pub q1: Option<f64>,
    #[arg(long = "Q2")]
    pub q2: Option<f64>,
    #[arg(long = "Q3")]
    pub q3: Option<f64>,
    #[arg(long = "R")]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value = "he", value_parser = parse_method)]
    pub method: DelayMethod,
}

pub fn parse_method(s: &str) -> Result<DelayMethod, String> {
    s.parse::<DelayMethod>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct StepArgs {
    #[command(flatten)]
    pub plant: PlantArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Also write bode.csv.
    #[arg(long)]
    pub bode: bool,
    #[arg(long = "omega-min", default_value_t = 1e-3)]
    pub omega_min: f64,
    #[arg(long = "omega-max", default_value_t = 1e3)]
    pub omega_max: f64,
    #[arg(long = "bode-points", default_value_t = 241)]
    pub bode_points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub plant: PlantArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub controller: ControllerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub plant: PlantArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated delay methods.
    #[arg(long = "method", value_delimiter = ',', default_value = "cai,he", value_parser = parse_method)]
    pub methods: Vec<DelayMethod>,
    #[arg(long, default_value_t = 100)]
    pub population: usize,
    #[arg(long, default_value_t = 100)]
    pub generations: usize,
    #[arg(long = "pareto-fraction", default_value_t = 0.7)]
    pub pareto_fraction: f64,
    #[arg(long = "crossover-fraction", default_value_t = 0.8)]
    pub crossover_fraction: f64,
    #[arg(long = "mutation-scale", default_value_t = 0.1)]
    pub mutation_scale: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Independent runs per method; their fronts are merged.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Stop once the front's spread settles.
    #[arg(long = "early-stop")]
    pub early_stop: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RuleArgs {
    #[arg(long = "LT")]
    pub l_over_t: f64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long = "K", default_value_t = 1.0)]
    pub gain: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub plant: PlantArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub controller: ControllerArgs,
    /// Delays to test (default: nominal L × 0.8, 0.9, 1, 1.1, 1.2).
    #[arg(long, value_delimiter = ',')]
    pub delays: Option<Vec<f64>>,
    /// Time constants to test (default: nominal T × 0.8 … 1.2).
    #[arg(long = "time-constants", value_delimiter = ',')]
    pub time_constants: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct GainsArgs {
    #[command(flatten)]
    pub plant: PlantArgs,
    #[arg(long = "Q1")]
    pub q1: f64,
    #[arg(long = "Q2")]
    pub q2: f64,
    #[arg(long = "Q3")]
    pub q3: f64,
    #[arg(long = "R")]
    pub r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value = "he", value_parser = parse_method)]
    pub method: DelayMethod,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() || matches!(e, Error::EmptyFront) {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let cmd = Cli::command();
    let args = match config::merge_config(&cmd, args) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match cmd
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
