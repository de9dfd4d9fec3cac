//! `fbia` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "fbia", version, about = "Joint estimation of dependent Gaussian graphical models")]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with `[simulate]` and `[fit]` tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate replicate datasets with known graphs.
    Simulate(SimulateArgs),
    /// Estimate graphs for all conditions.
    Fit(FitArgs),
    /// Score fitted graphs against the truth.
    Evaluate(EvaluateArgs),
    /// Print hubs, edge counts and edge changes of a fit.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_parser = ["ar2", "scalefree", "hub"])]
    pub kind: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_parser = ["temporal", "spatial"])]
    pub lineage: Option<String>,
    /// Fraction of edges rewired between related conditions.
    #[arg(long)]
    pub frac: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Manifest file, or a directory of replicate directories each holding
    /// a `manifest.json`.
    #[arg(long, conflicts_with = "files")]
    pub manifest: Option<PathBuf>,
    /// One CSV per condition, in condition order.
    #[arg(required_unless_present = "manifest")]
    pub files: Vec<PathBuf>,
    #[arg(long, value_parser = ["temporal", "spatial"])]
    pub prior: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub arity: Option<u8>,
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long)]
    pub alpha2: Option<f64>,
    #[arg(long)]
    pub a1: Option<f64>,
    #[arg(long)]
    pub b1: Option<f64>,
    #[arg(long)]
    pub a2: Option<f64>,
    #[arg(long)]
    pub b2: Option<f64>,
    #[arg(long, value_parser = ["auto", "exact", "gibbs"])]
    pub engine: Option<String>,
    /// Final multiple-testing procedure.
    #[arg(long, value_parser = ["eb", "by"])]
    pub method: Option<String>,
    /// Multiple-testing procedure of the screening step.
    #[arg(long, value_parser = ["eb", "by"])]
    pub screen_method: Option<String>,
    /// Neighborhood-size constant.
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// How Gibbs sweeps become configuration probabilities.
    #[arg(long, value_parser = ["rao-blackwell", "frequencies"])]
    pub gibbs_estimator: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub adjust_covariates: bool,
    /// Use Φ⁻¹(1 − p) for adjusted scores instead of the signed form.
    #[arg(long)]
    pub unsigned_adjusted: bool,
    /// Fix the mean of the absent-edge group at zero.
    #[arg(long)]
    pub pin_null_mean: bool,
    /// Group × time integration; needs a manifest with two groups.
    #[arg(long)]
    pub two_step: bool,
    /// Skip per-condition centering and scaling.
    #[arg(long)]
    pub no_standardize: bool,
    /// Reuse ψ-score and integration results kept under `OUT/cache`.
    #[arg(long)]
    pub cache: bool,
    /// Dump top posterior configurations of this many strongest edges.
    #[arg(long, default_value_t = 0)]
    pub dump_posteriors: usize,
    /// Write each condition's screened network.
    #[arg(long)]
    pub debug_screening: bool,
    #[arg(long, default_value_t = 10)]
    pub hubs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Fit output directory, or a directory of replicate fits.
    #[arg(long)]
    pub fit: PathBuf,
    /// Simulation directory matching `--fit`.
    #[arg(long)]
    pub truth: PathBuf,
    /// `auto` or a comma-separated list of |score| thresholds.
    #[arg(long, default_value = "auto")]
    pub grid: String,
    /// Also trace a PR curve by rerunning detection at each of these
    /// comma-separated α₂ levels.
    #[arg(long)]
    pub alpha_sweep: Option<String>,
    /// Detection method used by `--alpha-sweep`.
    #[arg(long, value_parser = ["eb", "by"], default_value = "eb")]
    pub method: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Directory that also receives `report.csv` or `report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(u) = e.downcast_ref::<commands::UsageError>() {
                eprintln!("error: {u}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}
