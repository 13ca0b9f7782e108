//! `redistrict`: synthesize states, sample plan ensembles, and score plans
//! of interest against them.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "redistrict", version, about = "Ensemble sampling of district plans and gerrymandering indices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic grid state: graph, votes, initial and packed plans.
    Synth(SynthArgs),
    /// Sample an ensemble of plans.
    Sample(SampleArgs),
    /// Sample plans that stay close to a reference plan.
    Neighborhood(SampleArgs),
    /// Re-tally votes under one plan.
    Tally(TallyArgs),
    /// Gerrymandering, representativeness and efficiency-gap indices of a plan.
    Indices(IndicesArgs),
    /// Per-rank box-plot statistics of an ensemble.
    Boxplot(ExportArgs),
    /// Complementary CDFs of the ensemble's index values.
    Ccdf(CcdfArgs),
    /// Seat and interpolated-seat histograms.
    Seats(SeatsArgs),
    /// Enumerate every connected plan of a tiny graph with exact probabilities.
    Enumerate(EnumerateArgs),
    /// Search for score weights meeting the tuning targets.
    Tune(TuneArgs),
}

#[derive(Args, Clone, Default)]
struct GraphArgs {
    #[arg(long, value_name = "PATH")]
    graph_nodes: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    graph_edges: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Uniform,
    Urban,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "urban")]
    preset: Preset,
    /// JSON synthesis spec; overrides the preset.
    #[arg(long, value_name = "PATH")]
    spec: Option<PathBuf>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    districts: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR", default_value = "synth")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CompactnessArg {
    Iso,
    Dispersion,
}

#[derive(Args)]
struct SampleArgs {
    /// Run configuration JSON.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    graph: GraphArgs,
    /// Initial plan CSV.
    #[arg(long, value_name = "PATH")]
    plan: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    votes: Option<PathBuf>,
    /// Samples per chain.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<u32>,
    #[arg(long)]
    districts: Option<u32>,
    /// Reference plan CSV for the neighborhood constraint.
    #[arg(long, value_name = "PATH")]
    neighborhood: Option<PathBuf>,
    #[arg(long)]
    max_dev: Option<u32>,
    #[arg(long, value_enum)]
    compactness: Option<CompactnessArg>,
    /// Store plans as CSV files next to the ensemble instead of inline.
    #[arg(long)]
    sidecar_plans: bool,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TallyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_name = "PATH")]
    plan: PathBuf,
    #[arg(long, value_name = "PATH")]
    votes: PathBuf,
    /// Write the JSON result here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnsembleArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_name = "PATH")]
    ensemble: PathBuf,
    #[arg(long, value_name = "PATH")]
    votes: PathBuf,
    /// Include samples that fail the thresholds.
    #[arg(long)]
    all_samples: bool,
    /// Output directory; defaults to the ensemble's directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IndicesArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_name = "PATH")]
    ensemble: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    votes: Option<PathBuf>,
    /// Plan of interest CSV.
    #[arg(long, value_name = "PATH")]
    plan: Option<PathBuf>,
    /// Plan of interest as comma-separated district dem shares.
    #[arg(long, value_name = "LIST")]
    shares: Option<String>,
    /// Rank means as comma-separated shares, instead of an ensemble.
    #[arg(long, value_name = "LIST")]
    means: Option<String>,
    /// Mean interpolated seats, instead of an ensemble.
    #[arg(long)]
    interp_mean: Option<f64>,
    #[arg(long)]
    all_samples: bool,
    /// Output directory for indices.json; without it the report goes to
    /// standard output.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IndexKind {
    Gerrymandering,
    Representativeness,
    EfficiencyGap,
    All,
}

#[derive(Args)]
struct CcdfArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long, value_enum, default_value = "all")]
    index: IndexKind,
}

#[derive(Args)]
struct SeatsArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    /// Bin width of the interpolated-seat histogram.
    #[arg(long, default_value_t = 0.1)]
    width: f64,
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    districts: u32,
    /// Keep only plans with every district within this population fraction.
    #[arg(long)]
    balance: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Score weights JSON; defaults otherwise.
    #[arg(long, value_name = "PATH")]
    weights: Option<PathBuf>,
    #[arg(long, value_enum)]
    compactness: Option<CompactnessArg>,
    #[arg(long, value_name = "DIR", default_value = "enumeration")]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Tuning targets JSON; defaults otherwise.
    #[arg(long, value_name = "PATH")]
    targets: Option<PathBuf>,
    /// Candidate weight ladders JSON; defaults otherwise.
    #[arg(long, value_name = "PATH")]
    ladders: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    max_trials: usize,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<u32>,
    #[arg(long, value_name = "DIR", default_value = "tuning")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
