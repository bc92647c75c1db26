//! `mtgn`: train and inspect particle-flow transport maps.
//!
//! Subcommands generate synthetic recovery tasks, train a flow on CSV point
//! clouds, evaluate checkpoints, run the saddle reference dynamic, and
//! re-encode external CSV clouds. Every command writes its artifacts plus a
//! `manifest.json` recording resolved parameters and content hashes, so any
//! run can be reproduced and verified from its output directory alone.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or configuration error,
//! 3 numeric failure (non-finite values).

mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mtgn::Error;

#[derive(Parser, Debug)]
#[command(
    name = "mtgn",
    version,
    about = "Particle-flow generative modelling: transport a template cloud onto a reference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic recovery task with a known true transport.
    Synth(SynthArgs),
    /// Train a flow that pushes a template cloud onto a reference cloud.
    Train(TrainArgs),
    /// Push a cloud through a checkpoint and score it.
    Eval(EvalArgs),
    /// Run the descent-ascent saddle reference dynamic.
    Saddle(SaddleArgs),
    /// Validate an external CSV cloud and re-encode it canonically.
    Ingest(IngestArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Particle dimension.
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Layers in the true flow.
    #[arg(long, default_value_t = 10)]
    layers: usize,
    /// Training points per cloud.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Held-out template points.
    #[arg(long = "n-test", default_value_t = 1000)]
    n_test: usize,
    /// Standard deviation of the true flow's weights.
    #[arg(long = "weight-scale", default_value_t = 0.5)]
    weight_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OptimizerArg {
    Adam,
    Gd,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Template cloud CSV.
    #[arg(long)]
    template: PathBuf,
    /// Reference cloud CSV.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, default_value_t = 10)]
    layers: usize,
    /// Add per-layer bias vectors to the flow.
    #[arg(long)]
    bias: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Energy weight.
    #[arg(long, default_value_t = 5e-5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.02)]
    lr: f64,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch: usize,
    /// Batches per epoch; defaults to one pass over the smaller cloud.
    #[arg(long = "steps-per-epoch")]
    steps_per_epoch: Option<usize>,
    /// Accept batches below the minimum size of 64.
    #[arg(long = "allow-small-batch")]
    allow_small_batch: bool,
    #[arg(long = "sigma-init", default_value_t = 50.0)]
    sigma_init: f64,
    #[arg(long = "sigma-factor", default_value_t = 2.0)]
    sigma_factor: f64,
    #[arg(long = "sigma-period", default_value_t = 30)]
    sigma_period: usize,
    #[arg(long = "sigma-floor", default_value_t = 0.78)]
    sigma_floor: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    optimizer: OptimizerArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Flow checkpoint JSON.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Cloud to transport.
    #[arg(long)]
    test: PathBuf,
    /// Ground-truth checkpoint; enables the recovery-error score.
    #[arg(long = "theta-true")]
    theta_true: Option<PathBuf>,
    /// Reference cloud; enables the misfit score.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Bandwidth for the misfit score.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SaddleArgs {
    #[arg(long, default_value_t = 0.01)]
    mu: f64,
    #[arg(long, default_value_t = 5000)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    theta0: f64,
    #[arg(long, default_value_t = 1.0)]
    eta0: f64,
    /// Update eta from the old theta instead of the fresh one.
    #[arg(long)]
    simultaneous: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// CSV cloud to validate and re-encode.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Caps the global rayon pool when MTGN_THREADS is set; otherwise rayon
/// picks the core count.
fn configure_threads() {
    if let Ok(v) = std::env::var("MTGN_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // Ignore the error: the pool can only be configured once,
                // and a pre-built pool means the cap already applies.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("warning: MTGN_THREADS must be a positive integer, ignoring {v:?}");
            }
        }
    }
}

fn run(cli: Cli) -> mtgn::Result<()> {
    match cli.command {
        Command::Synth(args) => commands::synth(&args),
        Command::Train(args) => commands::train(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Saddle(args) => commands::saddle(&args),
        Command::Ingest(args) => commands::ingest(&args),
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 by default; this tool reserves 2 for data errors
            // and reports every usage problem as 1.
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp
                    | clap::error::ErrorKind::DisplayVersion
                    | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            );
            let _ = e.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonFinite(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
