//! `hydroflux` — monthly water-balance modeling pipeline.
//!
//! Subcommands: `synth`, `simulate`, `calibrate`, `train-ml`, `train-piml`,
//! `evaluate`, `water-balance`. Every run writes its resolved configuration
//! (TOML) beside its outputs; rerunning from that file with the same seed
//! reproduces the numeric outputs byte for byte.
//!
//! Exit codes: 0 on success, 1 on computational failure (with a JSON error
//! report on stderr), 2 on usage errors.

mod commands;
mod config;
mod io;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub struct CliError {
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn new(kind: impl Into<String>, message: impl Into<String>) -> Self {
        CliError {
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new("data", message)
    }

    fn to_json(&self) -> String {
        serde_json::json!({
            "format_version": config::FORMAT_VERSION,
            "error": { "kind": self.kind, "message": self.message },
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

macro_rules! cli_error_from {
    ($($ty:ty),+ $(,)?) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                let e: hydroflux::HydroError = e.into();
                CliError::new(e.kind(), e.to_string())
            }
        }
    )+};
}

cli_error_from!(
    hydroflux::timeseries::TimeseriesError,
    hydroflux::pet::PetError,
    hydroflux::abcd::AbcdError,
    hydroflux::metrics::MetricsError,
    hydroflux::regress::RegressError,
    hydroflux::calibrate::CalibrateError,
    hydroflux::piml::PimlError,
    hydroflux::synth::SynthError,
);

impl From<hydroflux::HydroError> for CliError {
    fn from(e: hydroflux::HydroError) -> Self {
        CliError::new(e.kind(), e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("io", e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "hydroflux", version, about = "Monthly water-balance modeling: abcd simulation, swarm calibration, embedded ML, and physics-informed composition")]
struct Cli {
    /// Experiment configuration TOML; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing; default `out-<command>`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Master seed; falls back to $HYDROFLUX_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic catchment (forcing CSV + truth file).
    Synth(commands::SynthArgs),
    /// Run the abcd water-balance model and write the full flux trace.
    Simulate(commands::SimulateArgs),
    /// Calibrate abcd parameters with particle-swarm optimization.
    Calibrate(commands::CalibrateArgs),
    /// Train a pure-ML streamflow regressor and score it on the test split.
    TrainMl(commands::TrainMlArgs),
    /// Train the two-layer physics-informed composition (ET then Q).
    TrainPiml(commands::TrainPimlArgs),
    /// Compute NSE/PBIAS/RMSE (and interval coverage) for a prediction CSV.
    Evaluate(commands::EvaluateArgs),
    /// Annual water-balance audit of prediction sets against observations.
    WaterBalance(commands::WaterBalanceArgs),
}

fn seed_from_env() -> Option<u64> {
    std::env::var("HYDROFLUX_SEED").ok()?.trim().parse().ok()
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => config::ExperimentConfig::load(path)?,
        None => config::ExperimentConfig::default(),
    };
    let seed = cli
        .seed
        .or(cfg.run.seed)
        .or_else(seed_from_env)
        .unwrap_or(0);

    let (name, out_dir): (&str, PathBuf) = {
        let name = match &cli.command {
            Command::Synth(_) => "synth",
            Command::Simulate(_) => "simulate",
            Command::Calibrate(_) => "calibrate",
            Command::TrainMl(_) => "train-ml",
            Command::TrainPiml(_) => "train-piml",
            Command::Evaluate(_) => "evaluate",
            Command::WaterBalance(_) => "water-balance",
        };
        let dir = cli
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("out-{name}")));
        (name, dir)
    };
    std::fs::create_dir_all(&out_dir)?;

    let ctx = commands::Ctx {
        seed,
        out_dir,
        command: name,
    };
    match cli.command {
        Command::Synth(args) => commands::synth(&ctx, &mut cfg, args),
        Command::Simulate(args) => commands::simulate(&ctx, &mut cfg, args),
        Command::Calibrate(args) => commands::calibrate(&ctx, &mut cfg, args),
        Command::TrainMl(args) => commands::train_ml(&ctx, &mut cfg, args),
        Command::TrainPiml(args) => commands::train_piml(&ctx, &mut cfg, args),
        Command::Evaluate(args) => commands::evaluate(&ctx, &mut cfg, args),
        Command::WaterBalance(args) => commands::water_balance(&ctx, &mut cfg, args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(1);
    }
}
