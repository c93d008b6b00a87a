use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use epf_cli::{cmd_backtest, cmd_evaluate, cmd_ingest, cmd_report, cmd_select, cmd_synth, cmd_tune, CliError, Context};

/// Day-ahead electricity price forecasting pipeline.
#[derive(Debug, Parser)]
#[command(name = "epf", version)]
struct Args {
    /// Experiment config (TOML).
    #[arg(long, global = true, default_value = "epf.toml")]
    config: PathBuf,
    /// Overrides the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for tuning and ensemble reruns.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and clean a raw market CSV.
    Ingest,
    /// Generate a synthetic market.
    Synth,
    /// Hyperparameter study per model on the validation period.
    Tune,
    /// Online backtest of every model on the test period.
    Backtest,
    /// Build BOA ensembles from the tuning studies.
    Select,
    /// Test-period metrics of all backtests and ensembles.
    Evaluate,
    /// Comparison, hourly RMSE, DM and Pareto tables.
    Report,
}

fn run(args: Args) -> Result<(), CliError> {
    let ctx = Context::load(&args.config, args.seed, args.jobs, args.out)?;
    match args.command {
        Command::Ingest => cmd_ingest(&ctx).map(|_| ()),
        Command::Synth => cmd_synth(&ctx).map(|_| ()),
        Command::Tune => cmd_tune(&ctx),
        Command::Backtest => cmd_backtest(&ctx),
        Command::Select => cmd_select(&ctx),
        Command::Evaluate => cmd_evaluate(&ctx).map(|_| ()),
        Command::Report => cmd_report(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { epf_cli::EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
