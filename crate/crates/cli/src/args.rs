use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tenure_core::report::{DEFAULT_BINS, DEFAULT_TRIM};
use tenure_core::{MatchingKeyMode, MonthStamp, ValuationMode};

#[derive(Debug, Parser)]
#[command(name = "tenure", version, about = "Prices civil-service tenure from monthly wage panels")]
pub struct Cli {
    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic panel and its price index.
    Synth(SynthArgs),
    /// Parse, filter and deflate a panel into wage series.
    Ingest(IngestArgs),
    /// Per-worker return rate, downside deviation and Sortino ratio.
    Stats(StatsArgs),
    /// Natural-breaks brackets over private-sector workers.
    Brackets(BracketsArgs),
    /// Value tenure for government workers.
    Value(ValueArgs),
    /// Per-level summaries and trimmed histograms.
    Report(ReportArgs),
    /// Run every stage in order, keeping intermediate files.
    All(AllArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// `key = value` generator config; unset keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Workers per category.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value = "panel.csv")]
    pub out: PathBuf,
    /// Defaults to `price_index.csv` next to `--out`.
    #[arg(long)]
    pub index_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Price index CSV `year,month,index`.
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, default_value = "2019-12")]
    pub deflate_to: MonthStamp,
    /// CSV `code,category` mapping employer-nature codes.
    #[arg(long)]
    pub nature_map: Option<PathBuf>,
    /// Workers sampled per category (default: keep all).
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "series.csv")]
    pub out: PathBuf,
    /// Defaults to `ingest_report.json` next to `--out`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "stats.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BracketsArgs {
    /// Stats CSV from `stats`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, visible_alias = "k", default_value_t = 10)]
    pub k_classes: usize,
    /// mean-2005 or first-three-sum
    #[arg(long, default_value = "mean-2005")]
    pub matching_key: MatchingKeyMode,
    /// Written as JSON when the extension is `.json`, CSV otherwise.
    #[arg(long, default_value = "brackets.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValueArgs {
    /// Stats CSV from `stats`.
    #[arg(long)]
    pub stats: PathBuf,
    /// Bracket table (CSV or `.json`); the published table when omitted.
    #[arg(long)]
    pub brackets: Option<PathBuf>,
    /// formula or paper-example
    #[arg(long, default_value = "formula")]
    pub mode: ValuationMode,
    #[arg(long, default_value = "mean-2005")]
    pub matching_key: MatchingKeyMode,
    #[arg(long, default_value = "valuations.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Valuations CSV from `value`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "report")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TRIM)]
    pub trim: f64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args)]
pub struct AllArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Workers per category.
    #[arg(long, default_value_t = 1000)]
    pub workers: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "2019-12")]
    pub deflate_to: MonthStamp,
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, visible_alias = "k", default_value_t = 10)]
    pub k_classes: usize,
    #[arg(long, default_value = "formula")]
    pub mode: ValuationMode,
    #[arg(long, default_value = "mean-2005")]
    pub matching_key: MatchingKeyMode,
    #[arg(long, default_value_t = DEFAULT_TRIM)]
    pub trim: f64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
}
