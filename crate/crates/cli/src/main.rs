use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use invnav_core::experiments::{run_experiment, Experiment, ExperimentSpec};
use invnav_core::sim::ScenarioConfig;

const FAILED_CHECK: u8 = 1;
const ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "invnav",
    version,
    about = "Runs the invariant filtering and smoothing experiments",
    after_help = "Run `invnav list` for the experiment names and `invnav describe <NAME>` for their settings."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the available experiments
    List,
    /// Print the scenario constants and checks of an experiment
    Describe { name: String },
    /// Run an experiment: invnav <EXPERIMENT> [OPTIONS]
    #[command(external_subcommand)]
    Run(Vec<String>),
}

#[derive(Debug, Parser)]
#[command(name = "invnav <EXPERIMENT>", no_binary_name = true)]
struct RunCli {
    #[command(flatten)]
    args: RunArgs,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario file (TOML) replacing the default simulated scenario
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// First random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for CSV files and summaries; nothing is written without it
    #[arg(long, value_name = "DIR", env = "INVNAV_OUT")]
    out: Option<PathBuf>,
    /// Number of steps or updates
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    /// Print nothing but errors
    #[arg(long)]
    quiet: bool,
}

fn run(words: &[String]) -> Result<bool, String> {
    let (name, rest) = words.split_first().ok_or("missing experiment name")?;
    let experiment: Experiment = name.parse().map_err(|e| format!("{e}"))?;
    let args = RunCli::try_parse_from(rest)
        .unwrap_or_else(|e| e.exit())
        .args;
    let scenario = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            Some(
                ScenarioConfig::from_toml_str(&text)
                    .map_err(|e| format!("{}: {e}", path.display()))?,
            )
        }
        None => None,
    };
    let spec = ExperimentSpec {
        experiment,
        scenario,
        seed: args.seed,
        steps: args.steps,
        out_dir: args.out.clone(),
    };
    let summary = run_experiment(&spec).map_err(|e| e.to_string())?;
    if !args.quiet {
        for check in &summary.checks {
            println!("{check}");
        }
        for (name, value) in &summary.metrics {
            println!("  {name} = {value:e}");
        }
        if let Some(dir) = &args.out {
            println!("results in {}", dir.join(experiment.name()).display());
        }
        println!(
            "{}: {}",
            experiment,
            if summary.passed() { "PASS" } else { "FAIL" }
        );
    }
    Ok(summary.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for e in Experiment::ALL {
                println!("{:<18} {}", e.name(), e.title());
            }
            ExitCode::SUCCESS
        }
        Command::Describe { name } => match name.parse::<Experiment>() {
            Ok(e) => {
                println!("{}: {}\n\n{}", e.name(), e.title(), e.description());
                ExitCode::SUCCESS
            }
            Err(err) => {
                eprintln!("error: {err}");
                ExitCode::from(ERROR)
            }
        },
        Command::Run(words) => match run(&words) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(FAILED_CHECK),
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(ERROR)
            }
        },
    }
}
