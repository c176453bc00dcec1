//! `opmon`: simulate datasets, train and evaluate monitors, run sweeps.

mod commands;
mod config;
#[cfg(test)]
mod tests;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use opmon_core::experiments::NetKind;
use opmon_core::ModulationFormat;

use config::config_help;

#[derive(Parser, Debug)]
#[command(name = "opmon", version, about = "Optical performance monitoring workbench")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed for every random stream [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads [default: all cores]
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Overwrite existing output files
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate, equalize and histogram frames into a split dataset
    #[command(after_long_help = config_help())]
    Simulate(SimulateArgs),
    /// Train one network on a dataset
    #[command(after_long_help = config_help())]
    Train(TrainArgs),
    /// Evaluate a trained network on one dataset partition
    #[command(after_long_help = config_help())]
    Evaluate(EvaluateArgs),
    /// Multi-seed hyperparameter sweep
    #[command(after_long_help = config_help())]
    Sweep(SweepArgs),
    /// Multi-task network against both single-task networks
    #[command(after_long_help = config_help())]
    Compare(CompareArgs),
}

#[derive(Args, Debug, Default)]
struct DatasetArgs {
    /// Frames per (format, OSNR) point [default: 10]
    #[arg(long)]
    frames_per_point: Option<usize>,
    /// Comma-separated formats [default: OOK,PAM4,PAM8]
    #[arg(long, value_delimiter = ',')]
    formats: Option<Vec<ModulationFormat>>,
    /// Comma-separated OSNR grid in dB [default: 32,33,...,45]
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    osnr: Option<Vec<f64>>,
    /// Histogram bins [default: 100]
    #[arg(long)]
    bins: Option<usize>,
    /// Symbols per frame [default: 8191]
    #[arg(long)]
    n_symbols: Option<usize>,
    /// Split each format separately
    #[arg(long)]
    stratified: bool,
    /// Raw bin counts instead of relative frequencies
    #[arg(long)]
    raw_counts: bool,
}

#[derive(Args, Debug, Default)]
struct TrainingArgs {
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Minibatch size [default: 32]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Epoch limit [default: 2000]
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Epochs without validation improvement before stopping [default: 100]
    #[arg(long)]
    patience: Option<usize>,
    /// Cross-entropy on the format head instead of squared error
    #[arg(long)]
    cross_entropy: bool,
    /// OSNR to MFI loss weight ratio [default: 5]
    #[arg(long)]
    loss_ratio: Option<f64>,
    /// Shared hidden layer width [default: 60 multi-task, 110 single-task]
    #[arg(long)]
    shared: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StlTask {
    Mfi,
    Osnr,
}

impl StlTask {
    fn kind(self) -> NetKind {
        match self {
            Self::Mfi => NetKind::StlMfi,
            Self::Osnr => NetKind::StlOsnr,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset CSV [default: <out>/dataset.csv]
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// Train a single-task network instead of the multi-task one
    #[arg(long, value_enum)]
    stl: Option<StlTask>,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PartitionArg {
    Train,
    Val,
    Test,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Model JSON [default: <out>/model.json]
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Dataset CSV [default: <out>/dataset.csv]
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// Partition to evaluate
    #[arg(long, value_enum, default_value = "test")]
    partition: PartitionArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    Bins,
    Shared,
    LossRatio,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Swept hyperparameter
    #[arg(value_enum)]
    kind: SweepKind,
    /// Comma-separated swept values [default: per sweep]
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Comma-separated network kinds: mtl, stl_mfi, stl_osnr [default: per sweep]
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<NetKind>>,
    /// Networks per cell [default: 8]
    #[arg(long)]
    n_seeds: Option<usize>,
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Networks per kind [default: 8]
    #[arg(long)]
    n_seeds: Option<usize>,
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    training: TrainingArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
