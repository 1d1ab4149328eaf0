//! Command line surface: `gen-data`, `train`, `eval` and `attribute`.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors (bad flags,
//! malformed inputs, missing splits or bag ids, single-class evaluation sets),
//! 3 when training produces a non-finite loss, 1 for other I/O failures.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{cmd_attribute, cmd_eval, cmd_gen_data, cmd_train, TrainSummary};
pub use config::{Overrides, RunConfig};

use crate::data::{DataError, Split};
use crate::dtfd::{DtfdError, Strategy};
use crate::metrics::MetricError;

#[derive(Debug, Parser)]
#[command(name = "dtfd", version, about = "Two-tier attention MIL with pseudo-bag distillation")]
pub struct Cli {
    /// Log progress (repeat for more detail). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic bag dataset.
    GenData(GenDataArgs),
    /// Train a two-tier model.
    Train(TrainArgs),
    /// Evaluate a trained model on one split.
    Eval(EvalArgs),
    /// Export per-instance attribution for bags.
    Attribute(AttributeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 400)]
    pub bags: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.1)]
    pub witness_rate: f64,
    #[arg(long, default_value_t = 2.0)]
    pub sep: f64,
    #[arg(long, default_value_t = 0.5)]
    pub pos_frac: f64,
    #[arg(long, default_value_t = 50)]
    pub k_min: usize,
    #[arg(long, default_value_t = 200)]
    pub k_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace generator outputs in a non-empty directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Dataset directory (containing manifest.csv) or manifest path.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "pseudo-bags")]
    pub pseudo_bags: Option<usize>,
    #[arg(long)]
    pub distill: Option<Strategy>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub d_att: Option<usize>,
    #[arg(long, value_name = "BOOL")]
    pub head_bias: Option<bool>,
    /// Width of an optional hidden layer in the classifier heads.
    #[arg(long)]
    pub head_hidden: Option<usize>,
}

impl TrainArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            data_dir: self.data.clone(),
            out_dir: self.out.clone(),
            m: self.pseudo_bags,
            strategy: self.distill,
            epochs: self.epochs,
            lr: self.lr,
            weight_decay: self.weight_decay,
            d_att: self.d_att,
            seed: self.seed,
            head_bias: self.head_bias,
            head_hidden: self.head_hidden,
            ..Overrides::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Tiers {
    #[default]
    Tier2,
    Tier1,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Defaults to the data directory the model was trained on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<Split>,
    #[arg(long, value_enum, default_value_t = Tiers::Tier2)]
    pub tiers: Tiers,
    /// Retrain once per seed with the model's resolved config and report mean ± 95% CI.
    #[arg(long, value_parser = config::parse_seed_list)]
    pub seeds: Option<::std::vec::Vec<u64>>,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AttributeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Bag id to export (repeatable). Without it, every bag of --split.
    #[arg(long = "bag")]
    pub bags: Vec<String>,
    #[arg(long, default_value_t = Split::Test)]
    pub split: Split,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failed command: message plus process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn io_code(e: &std::io::Error) -> i32 {
    match e.kind() {
        std::io::ErrorKind::NotFound | std::io::ErrorKind::InvalidData => EXIT_USAGE,
        _ => EXIT_IO,
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: io_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        let code = match &e {
            DataError::Io(io) => io_code(io),
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<DtfdError> for CliError {
    fn from(e: DtfdError) -> Self {
        let code = match &e {
            DtfdError::NonFiniteLoss { .. } => EXIT_NUMERIC,
            DtfdError::Io(io) => io_code(io),
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<crate::data::ManifestError> for CliError {
    fn from(e: crate::data::ManifestError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::io(e.to_string())
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::GenData(a) => cmd_gen_data(a).map(|summary| println!("{summary}")),
        Command::Train(a) => cmd_train(a).map(|s| println!("{s}")),
        Command::Eval(a) => cmd_eval(a).map(|json| println!("{json}")),
        Command::Attribute(a) => cmd_attribute(a).map(|summary| {
            if !summary.is_empty() {
                eprintln!("{summary}");
            }
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
