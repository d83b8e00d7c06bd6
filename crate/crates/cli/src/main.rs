//! `bxt`: train, evaluate and inspect boosted extremely randomized trees.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use bxt_core::SplitMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bxt", version, about = "Boosted extremely randomized trees and the AMS evaluation protocol")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model on the training part and write it with a per-stage log.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        boost: BoostArgs,
        #[command(flatten)]
        score: ScoreArgs,
    },
    /// Score a model on one data part and print the AMS report as JSON.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        score: ScoreArgs,
    },
    /// AMS as a function of the cut-off percentile, written as CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        score: ScoreArgs,
        /// Comma-separated, strictly increasing percentiles [default: 50,51,...,99]
        #[arg(long, value_delimiter = ',')]
        percentiles: Option<Vec<f64>>,
    },
    /// Vote correlation among trees sampled across all stages, written as CSV.
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Number of trees to sample [default: 100]
        #[arg(long)]
        n_trees: Option<usize>,
        /// Number of events the correlations are computed on [default: 1000]
        #[arg(long)]
        sample_size: Option<usize>,
        /// Data part to compute correlations on [default: test]
        #[arg(long, value_enum)]
        part: Option<Part>,
    },
    /// Write a two-Gaussian synthetic dataset to <out>/synthetic.csv.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of events [default: 10000]
        #[arg(long)]
        n_samples: Option<usize>,
        /// Number of features [default: 5]
        #[arg(long)]
        dimension: Option<usize>,
        /// Distance between class means in standard deviations [default: 2.0]
        #[arg(long)]
        overlap: Option<f64>,
        /// Signal prior in (0, 1] [default: 0.3]
        #[arg(long)]
        imbalance: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Flat key = value file; command-line flags override it
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Input CSV in the Higgs challenge layout
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Model file [train default: <out>/model.bxt]
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Output directory [default: .]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Root seed for every random choice [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it [default: all cores]
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Label column holding s / b [default: Label]
    #[arg(long)]
    label_column: Option<String>,
    /// Event weight column, or "none" [default: Weight]
    #[arg(long)]
    weight_column: Option<String>,
    /// Event id column, or "none" [default: EventId]
    #[arg(long)]
    id_column: Option<String>,
    /// Column tagging rows as train (t) / validation (b) / test (v); replaces the seeded split
    #[arg(long)]
    split_column: Option<String>,
    /// Comma-separated columns to drop
    #[arg(long, value_delimiter = ',')]
    ignore_columns: Option<Vec<String>>,
    /// [default: 0.3125]
    #[arg(long)]
    train_fraction: Option<f64>,
    /// [default: 0.125]
    #[arg(long)]
    validation_fraction: Option<f64>,
    /// [default: 0.5625]
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Keep class proportions equal across parts [default: true]
    #[arg(long, value_name = "true|false", action = clap::ArgAction::Set)]
    stratified: Option<bool>,
    /// Rescale event weights so each part keeps the full per-class totals [default: true]
    #[arg(long, value_name = "true|false", action = clap::ArgAction::Set)]
    rescale_event_weights: Option<bool>,
}

#[derive(Args, Debug)]
struct BoostArgs {
    /// random_split (BXT) or best_split (BDT) [default: random_split]
    #[arg(long, value_name = "random_split|best_split")]
    mode: Option<SplitMode>,
    /// Boosting stages J [default: 20]
    #[arg(long)]
    stages: Option<usize>,
    /// Trees per stage B [default: 100]
    #[arg(long)]
    trees: Option<usize>,
    /// [default: 8]
    #[arg(long)]
    max_depth: Option<usize>,
    /// Candidate features per node for random_split [default: ceil(sqrt(d))]
    #[arg(long)]
    k_features: Option<usize>,
    /// [default: 20]
    #[arg(long)]
    min_samples_leaf: Option<usize>,
    /// Smallest share of the tree's total weight a node needs to be split [default: 0]
    #[arg(long)]
    min_weighted_fraction: Option<f64>,
    /// Lower bound on the stage error [default: 1e-6]
    #[arg(long)]
    epsilon_floor: Option<f64>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Selection cut-off percentile of the margin [default: 85]
    #[arg(long)]
    percentile: Option<f64>,
    /// Regularization term added to the background [default: 0]
    #[arg(long)]
    b_reg: Option<f64>,
    /// Sum event weights (true) or count events (false) [default: true]
    #[arg(long, value_name = "true|false", action = clap::ArgAction::Set)]
    weighted: Option<bool>,
    /// Data part to score [default: test; validation for train]
    #[arg(long, value_enum)]
    part: Option<Part>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Part {
    Train,
    Validation,
    Test,
    All,
}

impl std::str::FromStr for Part {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Part as ValueEnum>::from_str(s, true)
    }
}

/// A user-facing error with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<bxt_core::Error> for Failure {
    fn from(e: bxt_core::Error) -> Self {
        let code = if matches!(e, bxt_core::Error::Contract(_)) { 3 } else { 2 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("bxt: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
