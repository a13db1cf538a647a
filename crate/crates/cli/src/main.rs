//! `qroulette` command-line runner.
//!
//! Every command writes a `<command>.manifest.json` next to its outputs;
//! `qroulette --manifest FILE` replays it.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qroulette::{Scheme, StateSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::{Outputs, RunManifest};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QROULETTE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "qroulette",
    version,
    about = "Random-phase homodyne intensity measurement toolkit"
)]
struct Cli {
    /// Output directory (default: $QROULETTE_OUT_DIR, else the current directory).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Replay the run recorded in a manifest file.
    #[arg(long)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "name")]
pub enum Command {
    /// Closed-form noise comparison for one state.
    Noise(NoiseArgs),
    /// Δ_RH = 0 contours of the squeezed family.
    Threshold(ThresholdArgs),
    /// Seeded Monte Carlo run of one detection scheme.
    Simulate(SimulateArgs),
    /// Naimark extension checks.
    #[command(subcommand)]
    Naimark(NaimarkMode),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Noise(_) => "noise",
            Command::Threshold(_) => "threshold",
            Command::Simulate(_) => "simulate",
            Command::Naimark(_) => "naimark",
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::Simulate(a) => Some(a.seed),
            Command::Naimark(NaimarkMode::DiscreteRandom(a)) => Some(a.seed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NoiseArgs {
    /// State, e.g. "kind=squeezed N=2 beta=0.5".
    #[arg(long)]
    pub state: StateSpec,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Also write noise.json.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThresholdArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.75, 0.5, 0.25, 0.1])]
    pub etas: Vec<f64>,
    /// Largest total photon number sampled.
    #[arg(long, default_value_t = 12.0)]
    pub n_max: f64,
    /// Samples of N per curve.
    #[arg(long, default_value_t = 1200)]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulateArgs {
    /// State, e.g. "kind=coherent N=4".
    #[arg(long)]
    pub state: StateSpec,
    /// roulette, heterodyne or direct.
    #[arg(long)]
    pub scheme: Scheme,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "mode")]
pub enum NaimarkMode {
    /// Build and verify random discrete roulettes.
    DiscreteRandom(DiscreteArgs),
    /// ⟨X̂⟩ against the homodyne limit over a ladder of probe amplitudes.
    Semiclassical(SemiclassicalArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiscreteArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub max_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub max_m: usize,
    /// Perturb one projector before validation (exercises the failure path).
    #[arg(long, hide = true)]
    #[serde(default)]
    pub corrupt: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SemiclassicalArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha_re: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha_im: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi: f64,
    /// Probe amplitudes |z|.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 4.0, 8.0])]
    pub z: Vec<f64>,
    /// System truncation (default: chosen from |α|).
    #[arg(long)]
    pub system_trunc: Option<usize>,
    /// Probe truncation (default: chosen from the largest |z|).
    #[arg(long)]
    pub probe_trunc: Option<usize>,
}

fn out_dir(flag: Option<PathBuf>, recorded: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or(recorded)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, dir) = match (cli.manifest, cli.command) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation("--manifest cannot be combined with a subcommand".into()))
        }
        (Some(path), None) => {
            let manifest = RunManifest::load(&path)?;
            (manifest.parameters, out_dir(cli.out_dir, Some(manifest.out_dir)))
        }
        (None, Some(command)) => (command, out_dir(cli.out_dir, None)),
        (None, None) => return Err(CliError::Validation("a subcommand or --manifest is required".into())),
    };

    let started = Instant::now();
    let mut outputs = Outputs::new(dir);
    // Outputs are written before a failing verdict is reported, so the
    // manifest is recorded either way.
    let outcome = commands::execute(&command, &mut outputs);
    let name = command.name();
    let dir = outputs.dir().to_path_buf();
    let mut manifest_out = Outputs::new(dir.clone());
    let manifest = RunManifest {
        command: name.to_owned(),
        seed: command.seed(),
        parameters: command,
        version: env!("CARGO_PKG_VERSION").to_owned(),
        out_dir: dir,
        outputs: outputs.into_written(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    if outcome.is_ok() || !manifest.outputs.is_empty() {
        manifest_out.json(&format!("{name}.manifest.json"), &manifest)?;
    }
    outcome
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
