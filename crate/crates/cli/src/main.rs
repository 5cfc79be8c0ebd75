mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "hole", version, about = "Graph clustering with homophily-enhanced structure learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a dataset directory and write per-round metrics.
    Train(TrainArgs),
    /// Print edge homophily of a dataset or of every saved structure in a run.
    Homophily(HomophilyArgs),
    /// Label-guided homophily sweep with the structure-learning loop disabled.
    Oracle(OracleArgs),
    /// Write a stochastic block model dataset.
    Sbm(SbmArgs),
    /// Score an assignments file against ground-truth labels.
    Eval(EvalArgs),
}

/// Hyperparameter sources shared by `train` and `oracle`.
#[derive(Args, Clone)]
pub struct ConfigArgs {
    /// Built-in hyperparameter preset.
    #[arg(long)]
    preset: Option<String>,
    /// JSON object whose fields override the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Defaults to the configured seed (0 unless overridden).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gsl_epochs: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    joint_epochs: Option<usize>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Write structure_<r>.edges.tsv after every structure round.
    #[arg(long)]
    save_structures: bool,
    /// Write the final embedding to embedding.tsv.
    #[arg(long)]
    save_embedding: bool,
}

#[derive(Args)]
pub struct HomophilyArgs {
    #[arg(long)]
    data: PathBuf,
    /// Run directory holding structure_<r>.edges.tsv files.
    #[arg(long)]
    run: Option<PathBuf>,
}

#[derive(Args)]
pub struct OracleArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Highest target homophily; defaults to the current value plus 0.10.
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
}

#[derive(Args)]
pub struct SbmArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, default_value_t = 100)]
    block_size: usize,
    #[arg(long, default_value_t = 0.3)]
    p_in: f64,
    #[arg(long, default_value_t = 0.02)]
    p_out: f64,
    #[arg(long, default_value_t = 1.0)]
    signal: f64,
    /// Feature width; defaults to the number of blocks.
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
pub struct EvalArgs {
    /// One cluster id per line.
    #[arg(long)]
    pred: PathBuf,
    /// One class id per line.
    #[arg(long)]
    truth: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Homophily(a) => commands::homophily(&a),
        Command::Oracle(a) => commands::oracle(&a),
        Command::Sbm(a) => commands::sbm(&a),
        Command::Eval(a) => commands::eval(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
