//! `mlaris` scenario runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod manifest;

/// An error in what the user supplied (files, flags, config); exits with 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Debug, Parser)]
#[command(name = "mlaris", version, about = "Multilayered acoustic RIS simulator")]
pub struct Cli {
    /// Seed for every randomized stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory receiving output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Scenario configuration (TOML); command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the simplified PZT model to an impedance sweep.
    Fit(FitArgs),
    /// Discretize the impedance envelope between two parameter sets.
    Envelope(EnvelopeArgs),
    /// Synthesize the cascaded matching network.
    Match(MatchArgs),
    /// Pick the active tier count for given circuit parameters.
    SelectTier(SelectTierArgs),
    /// Map a reflection target to two-layer loads.
    Iq(IqArgs),
    /// Beam patterns and lobe metrics for one or all coding schemes.
    Beam(BeamArgs),
    /// Recover the normalized reflection coefficient from recordings.
    Extract(ExtractArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Weighting {
    Relative,
    Absolute,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sweep file with header `freq_hz,re_ohm,im_ohm`.
    pub sweep: PathBuf,
    #[arg(long, value_enum, default_value = "relative")]
    pub weighting: Weighting,
    /// Output file name (default: `<sweep stem>.params`).
    #[arg(long)]
    pub output: Option<String>,
}

#[derive(Debug, Args)]
pub struct EndpointArgs {
    /// Cold-end parameters file (default: fitted 9 °C fixture).
    #[arg(long)]
    pub alpha: Option<PathBuf>,
    /// Warm-end parameters file (default: fitted 22 °C fixture).
    #[arg(long)]
    pub beta: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnvelopeArgs {
    #[command(flatten)]
    pub endpoints: EndpointArgs,
    /// Number of envelope entries.
    #[arg(long)]
    pub nd: Option<usize>,
    /// Require the nominal endpoint ordering.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub endpoints: EndpointArgs,
    /// Number of envelope entries (default: 3 per tier).
    #[arg(long)]
    pub nd: Option<usize>,
    /// Number of tiers (default: envelope size / 3).
    #[arg(long)]
    pub tiers: Option<usize>,
    #[arg(long)]
    pub f_low_hz: Option<f64>,
    #[arg(long)]
    pub f_high_hz: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub z0_ohm: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectTierArgs {
    /// Network file written by `match`.
    #[arg(long)]
    pub network: PathBuf,
    /// Parameters file to classify.
    #[arg(long, conflicts_with = "envelope", required_unless_present = "envelope")]
    pub params: Option<PathBuf>,
    /// Envelope file; every entry is classified.
    #[arg(long)]
    pub envelope: Option<PathBuf>,
    #[arg(long, default_value_t = 28e3)]
    pub probe_hz: f64,
}

#[derive(Debug, Args)]
pub struct IqArgs {
    /// Target amplitude in [0, 1].
    #[arg(long)]
    pub amplitude: f64,
    /// Target phase in degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub phase_deg: f64,
    /// Quadrature stage amplitudes, ascending.
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.6,0.9")]
    pub stages: Vec<f64>,
    #[arg(long)]
    pub z0_ohm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BeamArgs {
    /// `iq`, `2bit`, `1bit`, `continuous` or `all`.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub ring_radius: Option<f64>,
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub steer_deg: Option<f64>,
    #[arg(long)]
    pub z0_ohm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Synthetic two-layer scene `layer1,layer2`; repeat for several runs.
    #[arg(long, conflicts_with_all = ["load", "opop", "shsh"])]
    pub synthetic: Vec<String>,
    /// Recording with the loads under test.
    #[arg(long, requires_all = ["opop", "shsh", "loads"])]
    pub load: Option<PathBuf>,
    /// Recording with both layers open.
    #[arg(long)]
    pub opop: Option<PathBuf>,
    /// Recording with both layers shorted.
    #[arg(long)]
    pub shsh: Option<PathBuf>,
    /// Loads used for the recorded run, `layer1,layer2`.
    #[arg(long)]
    pub loads: Option<String>,
    /// Carrier for demodulating real-valued recordings.
    #[arg(long)]
    pub carrier_hz: Option<f64>,
    #[arg(long)]
    pub window_start_s: Option<f64>,
    #[arg(long)]
    pub window_end_s: Option<f64>,
    #[arg(long)]
    pub z0_ohm: Option<f64>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputError>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<mlaris::Error>() {
            return match e {
                mlaris::Error::Parameter(_) | mlaris::Error::Domain(_) | mlaris::Error::Parse { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
