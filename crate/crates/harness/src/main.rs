use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use extremes_harness::config::ExperimentKind;
use extremes_harness::{run_experiment, HarnessError};

#[derive(Parser)]
#[command(name = "extremes", about = "Gaussian-field extremes on growing manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical sup-law vs the double-exponential limit across scales
    LimitLaw(RunArgs),
    /// Fixed-manifold exceedance tail vs the first-order asymptote
    Tail(RunArgs),
    /// Pickands-constant ladder estimation
    Pickands(RunArgs),
    /// Covariance assumption diagnostics
    Assumptions(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json, tables/, plots/, manifest.json
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker thread count (defaults to all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::LimitLaw(a) => (ExperimentKind::LimitLaw, a),
        Command::Tail(a) => (ExperimentKind::Tail, a),
        Command::Pickands(a) => (ExperimentKind::Pickands, a),
        Command::Assumptions(a) => (ExperimentKind::Assumptions, a),
    };
    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run_experiment(kind, &args.config, args.seed, &args.out) {
        Ok(outcome) if outcome.violations.is_empty() => {
            eprintln!("ok: artifacts written to {}", args.out.display());
            ExitCode::SUCCESS
        }
        Ok(outcome) => {
            for v in &outcome.violations {
                eprintln!("violation: {v}");
            }
            eprintln!("artifacts written to {}", args.out.display());
            ExitCode::from(3)
        }
        Err(e @ HarnessError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
