//! `dgn`: generate planted corpora, build prototypes, train, evaluate and
//! inspect artifacts.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numeric failure.

mod commands;
mod inspect;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dgn_core::iodp::{CooccurrenceMode, Dispersion};
use dgn_core::model::AblationMode;

#[derive(Debug, Parser)]
#[command(
    name = "dgn",
    version,
    about = "Discriminative graph network toolkit for scene recognition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a planted synthetic train/test corpus.
    Gen(GenArgs),
    /// Build the inter-object discriminative prototype from a training manifest.
    Iodp(IodpArgs),
    /// Train a model and write a checkpoint plus a CSV trace.
    Train(TrainArgs),
    /// Top-1 and per-class accuracy of a checkpoint on a manifest.
    Eval(EvalArgs),
    /// Describe a prototype, checkpoint, label/feature map, or one manifest instance.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 7)]
    classes: usize,
    #[arg(long, default_value_t = 20)]
    objects: usize,
    /// Training instances per class.
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 20)]
    test_per_class: usize,
    #[arg(long, default_value_t = 2.0)]
    noise: f64,
    /// Grid cells per side (also the feature-map side).
    #[arg(long, default_value_t = 8)]
    cells: usize,
    #[arg(long, default_value_t = 4)]
    pixels_per_cell: usize,
    #[arg(long, default_value_t = 16)]
    channels: usize,
    #[arg(long, default_value_t = 2)]
    disc_per_class: usize,
    #[arg(long, default_value_t = 6)]
    common: usize,
    /// Probability that a cell holds one of its class's discriminative objects.
    #[arg(long, default_value_t = 0.25)]
    disc_rate: f64,
    #[arg(long, default_value_t = 304)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeFlag {
    Independent,
    Nonindependent,
}

impl From<ModeFlag> for CooccurrenceMode {
    fn from(m: ModeFlag) -> Self {
        match m {
            ModeFlag::Independent => CooccurrenceMode::Independent,
            ModeFlag::Nonindependent => CooccurrenceMode::NonIndependent,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricFlag {
    Range,
    Std,
    Cv,
}

impl From<MetricFlag> for Dispersion {
    fn from(m: MetricFlag) -> Self {
        match m {
            MetricFlag::Range => Dispersion::Range,
            MetricFlag::Std => Dispersion::StdDev,
            MetricFlag::Cv => Dispersion::CoeffVar,
        }
    }
}

#[derive(Debug, Args)]
struct IodpArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeFlag::Independent)]
    mode: ModeFlag,
    #[arg(long, value_enum, default_value_t = MetricFlag::Cv)]
    metric: MetricFlag,
    /// Square-root passivation of the dispersion (default on).
    #[arg(long, overrides_with = "no_passivate")]
    passivate: bool,
    #[arg(long, overrides_with = "passivate")]
    no_passivate: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainMode {
    Full,
    TrainEvalIodp,
    Baseline,
}

impl From<TrainMode> for AblationMode {
    fn from(m: TrainMode) -> Self {
        match m {
            TrainMode::Full => AblationMode::Full,
            TrainMode::TrainEvalIodp => AblationMode::TrainEvalIodp,
            TrainMode::Baseline => AblationMode::Baseline,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Optional held-out manifest scored after every epoch.
    #[arg(long)]
    test_manifest: Option<PathBuf>,
    /// Prototype (.dgnp); required by the graph modes.
    #[arg(long)]
    prototype: Option<PathBuf>,
    /// Output checkpoint (.dgnm).
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output CSV trace; defaults to the checkpoint path with a `.trace.csv` suffix.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TrainMode::Full)]
    mode: TrainMode,
    #[arg(long, default_value_t = 0.25)]
    lambda: f64,
    /// Hidden width `d`; defaults to the feature channel count.
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Comma-separated 0-based epochs at which the learning rate drops by 10x.
    #[arg(long, value_delimiter = ',', default_value = "10,15,20")]
    milestones: Vec<usize>,
    #[arg(long, default_value_t = 1e-5)]
    weight_decay: f64,
    #[arg(long, default_value_t = 304)]
    seed: u64,
    /// Drop the sigmoid on the auxiliary path.
    #[arg(long)]
    linear_aux: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Baseline,
    EvalOnlyIodp,
    TrainEvalIodp,
    Full,
}

impl From<EvalMode> for AblationMode {
    fn from(m: EvalMode) -> Self {
        match m {
            EvalMode::Baseline => AblationMode::Baseline,
            EvalMode::EvalOnlyIodp => AblationMode::EvalOnlyIodp,
            EvalMode::TrainEvalIodp => AblationMode::TrainEvalIodp,
            EvalMode::Full => AblationMode::Full,
        }
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    prototype: Option<PathBuf>,
    /// Evaluation mode; defaults to the checkpoint's own. `eval-only-iodp`
    /// plugs the prototype into a baseline checkpoint.
    #[arg(long, value_enum)]
    mode: Option<EvalMode>,
    /// Output CSV report; defaults to the checkpoint path with an `.eval.csv` suffix.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    artifact: PathBuf,
    /// Output prefix for PGM/CSV files; defaults to the artifact path without extension.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Prototype used to build an instance graph when inspecting a manifest.
    #[arg(long)]
    prototype: Option<PathBuf>,
    /// Manifest entry to inspect.
    #[arg(long, default_value_t = 0)]
    instance: usize,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<dgn_core::Error> for Failure {
    fn from(e: dgn_core::Error) -> Self {
        let code = match e {
            dgn_core::Error::Numeric(_) => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Iodp(a) => commands::iodp(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Inspect(a) => inspect::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dgn: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
