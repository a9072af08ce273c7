//! `bubble-audit`: run simulated sock-puppet studies and evaluate them.
//!
//! Exit status is 0 on success, 1 when runs or I/O failed, and 2 for
//! configuration and usage errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bubble-audit", version, about = "Filter-bubble audits against a simulated video platform")]
struct Cli {
    /// Master seed; every random draw of a study derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for study runs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output location; its meaning depends on the subcommand.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Study config file (TOML), used by `run`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a study and write records plus a manifest to --output.
    Run,
    /// Score a study and write comparison, linearity and series tables.
    Evaluate(EvaluateArgs),
    /// Predict stance labels for a catalog and append them to a label table.
    Classify(ClassifyArgs),
    /// Train the stance classifier on a labeled catalog.
    Train(TrainArgs),
    /// Agreement between two annotators of a label table.
    Kappa(KappaArgs),
    /// Compare the score distributions of two studies.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct LabelPolicyArgs {
    /// Minimum confidence for a predicted promoting label.
    #[arg(long, default_value_t = 0.7)]
    threshold: f64,
    /// What happens to predicted promoting labels under the threshold.
    #[arg(long, value_enum, default_value_t = BelowThresholdArg::Neutral)]
    below_threshold: BelowThresholdArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BelowThresholdArg {
    Neutral,
    Discard,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Study directory, or a directory of run records.
    study: PathBuf,
    /// Label table; defaults to the study's truth labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Family-wise significance level, as a fraction (`1/20`) or decimal.
    #[arg(long, default_value = "1/20")]
    alpha: String,
    /// Items scored per listing.
    #[arg(long, default_value_t = 10)]
    top_n: usize,
    /// Use the pre-watch probe as S1 for search (and home).
    #[arg(long)]
    baseline_start: bool,
    /// Largest tolerated share of scored items without a label.
    #[arg(long, default_value_t = 0.05)]
    max_missing: f64,
    /// Also draw SVG plots of the series.
    #[arg(long)]
    plots: bool,
    #[command(flatten)]
    policy: LabelPolicyArgs,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Catalog file, or a study directory holding one.
    catalog: PathBuf,
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SetupArg {
    BinaryNoNeutral,
    BinaryWithNeutral,
    ThreeClass,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Catalog file, or a study directory holding one.
    catalog: PathBuf,
    /// Label table; defaults to the study's truth labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SetupArg::ThreeClass)]
    setup: SetupArg,
    /// Cross-validate with this many folds before the final fit.
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[command(flatten)]
    policy: LabelPolicyArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    Code,
    Stance,
}

#[derive(Debug, Args)]
struct KappaArgs {
    /// Label table.
    labels: PathBuf,
    #[arg(long)]
    annotator_a: String,
    #[arg(long)]
    annotator_b: String,
    #[arg(long, value_enum, default_value_t = LevelArg::Code)]
    level: LevelArg,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// First study directory (the reference).
    study_a: PathBuf,
    /// Second study directory.
    study_b: PathBuf,
    #[arg(long)]
    labels_a: Option<PathBuf>,
    #[arg(long)]
    labels_b: Option<PathBuf>,
    #[arg(long, default_value = "search")]
    modality: String,
    #[arg(long, default_value = "1/20")]
    alpha: String,
    #[arg(long, default_value_t = 10)]
    top_n: usize,
    #[command(flatten)]
    policy: LabelPolicyArgs,
}

/// Bad flags or config files; mapped to exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match commands::dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
