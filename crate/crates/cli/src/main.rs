use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

use commands::CliError;

/// EPS fault-diagnosis pipeline: simulate telemetry, identify the model
/// bank, extract features and evaluate classifiers.
#[derive(Parser, Debug)]
#[command(name = "eps-fdd", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override values of the configuration file.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Configuration file (`key = value` with sections).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed for every random stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Samples per class (for `simulate`, the exact number of rows).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Sample period in seconds.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Append the running load-current moment to the power-system features.
    #[arg(long, global = true)]
    pub with_moment: Option<bool>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate telemetry for one fault class, or for all seven.
    Simulate {
        /// Fault tag, e.g. `Healthy` or `RegIgbtShort`.
        #[arg(long)]
        fault: Option<String>,
    },
    /// Train the model bank from a directory of telemetry CSVs.
    TrainModels {
        #[arg(long)]
        telemetry: PathBuf,
    },
    /// Compute the feature datasets from telemetry and a trained bank.
    ExtractFeatures {
        #[arg(long)]
        telemetry: PathBuf,
        #[arg(long)]
        models: PathBuf,
    },
    /// Train and evaluate classifiers on one feature dataset.
    Evaluate {
        #[arg(long)]
        features: PathBuf,
        /// `mlp`, `knn`, `dt`, `pca` or `all`.
        #[arg(long, default_value = "all")]
        classifier: String,
        /// Same as `--classifier all`.
        #[arg(long)]
        all: bool,
        /// `eps`, `pv` or `pair`.
        #[arg(long, default_value = "pair")]
        task: String,
    },
    /// Collect evaluation reports into one comparison table.
    Report {
        #[arg(long)]
        reports: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = commands::resolve_config(&cli.common)?;
    let c = &cli.common;
    match cli.command {
        Command::Simulate { fault } => commands::simulate(&config, c, fault.as_deref()),
        Command::TrainModels { telemetry } => commands::train_models(&config, c, &telemetry),
        Command::ExtractFeatures { telemetry, models } => commands::extract_features(&config, c, &telemetry, &models),
        Command::Evaluate {
            features,
            classifier,
            all,
            task,
        } => {
            let classifier = if all { "all".to_string() } else { classifier };
            commands::evaluate(&config, c, &features, &classifier, &task)
        }
        Command::Report { reports } => commands::report(&config, c, &reports),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
