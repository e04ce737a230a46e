use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Train and analyze single-node ReLU regression models.
#[derive(Debug, Parser)]
#[command(name = "onerelu", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic train/test pair with a planted model.
    Generate(GenerateArgs),
    /// Fit a model to a CSV dataset.
    Solve(SolveArgs),
    /// Exact global optimum by subset enumeration (m <= 20).
    Oracle(OracleArgs),
    /// Build the ReLU training instance for a {±1}-subset-sum instance.
    Reduce(ReduceArgs),
    /// Run a benchmark grid from a JSON config.
    Bench(BenchArgs),
    /// Asymptotic objective bracket for noise std and signal variance.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    /// Probability that a design entry is nonzero.
    #[arg(long, default_value_t = 0.5)]
    pub sparsity: f64,
    /// Signal-to-noise ratio in dB, or `inf`.
    #[arg(long)]
    pub db: String,
    #[arg(long)]
    pub seed: u64,
    /// Make the first p training rows e_i·sgn(β*_i).
    #[arg(long)]
    pub realizable_rows: bool,
    #[arg(long, default_value_t = 0.0)]
    pub beta_mean: f64,
    #[arg(long, default_value_t = 10.0)]
    pub beta_var: f64,
    /// Output paths: TRAIN.csv,TEST.csv,TRUTH.json
    #[arg(short = 'o', long = "output", value_delimiter = ',', required = true)]
    pub output: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// approx, sorting, iter, gd, sgd, sorting+iter or sorting+gd.
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub input: PathBuf,
    /// Order of the candidate family for `approx`.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Number of splits for the sorting method.
    #[arg(long, default_value_t = 10)]
    pub splits: usize,
    /// Outer iterations of the iterative heuristic.
    #[arg(long, default_value_t = 20)]
    pub rounds: usize,
    /// Seed for SGD batches (required for `sgd`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file with `solver` and `gd` sections overriding the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Exit with code 4 if the method did not converge.
    #[arg(long)]
    pub strict: bool,
    /// Disable the thread pool.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// Comma-separated nonnegative integers.
    #[arg(long, value_delimiter = ',', required = true)]
    pub a: Vec<u64>,
    /// Treat `a` as a plain subset-sum instance and append Σa first.
    #[arg(long)]
    pub from_subset_sum: bool,
    /// Solve the instance exactly and print FEASIBLE or INFEASIBLE.
    #[arg(long)]
    pub decide: bool,
    /// Write the instance CSV here instead of stdout.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
    /// Also write per-setting means and standard deviations here.
    #[arg(long)]
    pub aggregate: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub gamma: f64,
    #[arg(long = "delta-sq")]
    pub delta_sq: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { commands::EXIT_BAD_INPUT } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Solve(a) => commands::solve(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Bench(a) => commands::bench(a),
        Command::Bounds(a) => commands::bounds(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
