//! `secr`: simulate, fit, select, study and report from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use secr_core::study::ScenarioSet;
use secr_core::ModelId;

/// Exit status for failures that are neither usage nor numerical problems.
const EXIT_DATA: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "secr", version, about = "Spatial capture-recapture simulation, fitting and model selection")]
struct Cli {
    /// Log progress (repeat for more detail); RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one dataset with its truth record.
    Simulate(SimulateArgs),
    /// Fit one model to a dataset and write the chain.
    Fit(FitArgs),
    /// Score fitted chains with model-selection tools and pick a model.
    Select(SelectArgs),
    /// Run the simulation study and write its CSV tables.
    Study(StudyArgs),
    /// Print selection proportions and RMSEs from a study directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation config (TOML); looked up in SECR_CONFIG_PATH when relative and absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario table, used when no config is given.
    #[arg(long, value_enum, default_value = "scaled")]
    scenario_set: SetArg,
    /// Scenario id, used when no config is given.
    #[arg(long)]
    scenario: Option<u32>,
    /// Random seed; generated and recorded when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Model to fit (M1..M4).
    #[arg(long)]
    model: ModelId,
    /// Sampler config (TOML); looked up in SECR_CONFIG_PATH when relative and absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Total iterations, overriding the config.
    #[arg(long)]
    iterations: Option<usize>,
    /// Burn-in iterations, overriding the config.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Thinning factor, overriding the config.
    #[arg(long)]
    thin: Option<usize>,
    /// Random seed; generated and recorded when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// Fit output directories or chain files, one per model.
    #[arg(long = "chain", required = true, num_args = 1..)]
    chains: Vec<PathBuf>,
    /// Dataset the chains were fitted to.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated tools (e.g. HM,DIC1,GD-MAP:normal) or `all`.
    #[arg(long, default_value = "all")]
    tools: String,
    /// Thinning of draws for posterior predictive loss.
    #[arg(long, default_value_t = secr_core::criteria::PPL_THIN)]
    ppl_thin: usize,
    /// Seed for replicate simulation; generated and recorded when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// Study config (TOML); looked up in SECR_CONFIG_PATH when relative and absent.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in study instead of a config file.
    #[arg(long, value_enum)]
    preset: Option<SetArg>,
    /// Master seed, overriding the config; generated when neither gives one.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Reuse per-cell checkpoints from an earlier run in the same directory.
    #[arg(long)]
    resume: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory written by `secr study`.
    #[arg(long)]
    results: PathBuf,
    /// Only these tools (comma-separated); all by default.
    #[arg(long)]
    tools: Option<String>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum SetArg {
    Scaled,
    Standard,
}

impl From<SetArg> for ScenarioSet {
    fn from(s: SetArg) -> Self {
        match s {
            SetArg::Scaled => ScenarioSet::Scaled,
            SetArg::Standard => ScenarioSet::Standard,
        }
    }
}

/// Maps an error to the documented exit status: 1 usage, 2 data, 3 numerical.
fn exit_status(e: &commands::CliError) -> u8 {
    use secr_core::Error;
    match e {
        commands::CliError::Usage(_) => 1,
        commands::CliError::Data(_) => EXIT_DATA,
        commands::CliError::Core(err) if err.is_numerical() => 3,
        commands::CliError::Core(Error::InvalidArgument(_)) => 1,
        commands::CliError::Core(_) => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Select(a) => commands::select(a),
        Command::Study(a) => commands::study(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_status(&e))
        }
    }
}
