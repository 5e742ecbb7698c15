//! Command-line front end: dataset synthesis, training, offline processing,
//! evaluation tables and visualization data.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use odenet_va::solvers::Scheme;

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "odenet-va", version, about = "Learned diode-clipper models driven by numerical ODE solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render program material through a circuit and write a dataset.
    Synthesize(SynthesizeArgs),
    /// Fit a model preset to a dataset.
    Train(TrainArgs),
    /// Run a checkpoint over a mono WAV file.
    Process(ProcessArgs),
    /// Score checkpoints on the test split at several sampling rates.
    Evaluate(EvaluateArgs),
    /// Export derivative fields or output spectra as CSV.
    Visualize(VisualizeArgs),
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub circuit: Option<String>,
    /// Sample rate of the dataset in Hz.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Length of each generated clip in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub clips: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Model preset, e.g. odenet9-fe.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub solver: Option<Scheme>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Playback rate in Hz; defaults to the input file's rate.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub solver: Option<Scheme>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// May be given several times.
    #[arg(long = "checkpoint")]
    pub checkpoints: Vec<PathBuf>,
    /// Comma-separated list in Hz.
    #[arg(long)]
    pub rates: Option<config::RateList>,
    /// Restart every segment from the target state.
    #[arg(long)]
    pub segmented: bool,
    #[arg(long)]
    pub segment_len: Option<usize>,
    #[arg(long)]
    pub solver: Option<Scheme>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("artifact").args(["field", "spectrum"])))]
pub struct VisualizeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Circuit whose exact derivative is sampled instead of a model.
    #[arg(long)]
    pub oracle: Option<String>,
    #[arg(long)]
    pub field: bool,
    #[arg(long)]
    pub spectrum: bool,
    /// Fixed second state for field grids; may be repeated.
    #[arg(long, allow_negative_numbers = true)]
    pub y2: Vec<f64>,
    /// Points per grid axis.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Check that an oracle field is odd-symmetric.
    #[arg(long)]
    pub verify_symmetry: bool,
    #[arg(long)]
    pub rates: Option<config::RateList>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub amplitude: Option<f64>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synthesize(a) => commands::synthesize(a),
        Command::Train(a) => commands::train(a),
        Command::Process(a) => commands::process(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Visualize(a) => commands::visualize(a),
    }
}
