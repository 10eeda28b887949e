//! `crashplan` command-line tool.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "crashplan", version, about = "Time-cost-quality project scheduling solvers")]
pub struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "CRASHPLAN_THREADS")]
    pub threads: Option<usize>,

    /// Discount each payment from its milestone activity's start time instead
    /// of the event time when checking the budget.
    #[arg(long, global = true)]
    pub literal_eq15: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Run a metaheuristic and write its front.
    Solve(SolveArgs),
    /// Enumerate the exact Pareto front of a small instance.
    Oracle(OracleArgs),
    /// Compare two fronts, or summarize saved comparisons.
    Metrics(MetricsArgs),
    /// Taguchi L25 parameter tuning.
    Tune(TuneArgs),
    /// Re-evaluate under a grid of deadlines or discount rates.
    Sweep(SweepArgs),
    /// DEMATEL-based ANP criterion weights and mode qualities.
    Danp(DanpArgs),
    /// Decode and evaluate one chromosome.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub seed: u64,
    /// Activity count including the two dummies.
    #[arg(long)]
    pub activities: usize,
    #[arg(long, default_value_t = 2)]
    pub modes: usize,
    /// Probability of a precedence arc between two real activities.
    #[arg(long, default_value_t = 0.4)]
    pub density: f64,
    /// Maximum crash span per mode.
    #[arg(long, default_value_t = 3)]
    pub span: u32,
    #[arg(long, default_value_t = 2)]
    pub resources: usize,
    #[arg(long, default_value_t = 1.0)]
    pub deadline_factor: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    Moga,
    Nsga2,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON parameter file; explicit flags take precedence.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub pop: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub crossover: Option<f64>,
    #[arg(long)]
    pub mutation: Option<f64>,
    /// MOGA only.
    #[arg(long)]
    pub hill_climb: Option<f64>,
    /// MOGA only.
    #[arg(long)]
    pub elitism: Option<f64>,
    #[arg(long)]
    pub max_evaluations: Option<u64>,
    /// MOGA: report the final population's nondominated set.
    #[arg(long)]
    pub final_population: bool,
    /// NSGA-II: report the external archive.
    #[arg(long)]
    pub archive: bool,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_points: u128,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// First front (the `a` side of percentage differences).
    #[arg(long, requires = "b", conflicts_with = "summarize")]
    pub a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    pub b: Option<PathBuf>,
    /// Reference front for GD and MPFE, e.g. an oracle front.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub normalize: bool,
    /// Saved metric reports to aggregate.
    #[arg(long, num_args = 1.., required_unless_present = "a")]
    pub summarize: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write one flat CSV row per front.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// JSON file with five levels per factor.
    #[arg(long)]
    pub levels: Option<PathBuf>,
    /// Evaluation cap applied to every design run.
    #[arg(long)]
    pub max_evaluations: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Deadline,
    Discount,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub param: SweepParam,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[arg(long)]
    pub instance: PathBuf,
    /// Chromosome evaluated by the discount sweep; defaults to the baseline.
    #[arg(long)]
    pub chromosome: Option<String>,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_points: u128,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DanpArgs {
    #[arg(long)]
    pub influence: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Instance to patch with the computed qualities.
    #[arg(long, requires = "patched_out")]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub patched_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// `order,mode,duration` with colon-joined 1-based ids.
    #[arg(long)]
    pub chromosome: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
