mod cache;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use digitprint::ComparisonMode;

#[derive(Debug, Parser)]
#[command(
    name = "digitprint",
    version,
    about = "Writer identification from handwritten date-of-birth digits"
)]
struct Cli {
    /// Worker threads for extraction and scoring (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus and write it as a manifest with PGM images.
    Synth(SynthArgs),
    /// Extract handcrafted features into the on-disk cache.
    Extract(ExtractArgs),
    /// Closed-set identification: one report (with CMC) per N and seed.
    Identify(EvalArgs),
    /// Verification against pseudo-forgeries: one report (with EER) per N and seed.
    Verify(EvalArgs),
    /// Run identification and/or verification over a range of N and summarise.
    Sweep(SweepArgs),
    /// Merge reports into one summary table (CSV).
    Report(ReportArgs),
}

/// Where the samples come from.
#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Manifest CSV (writer_id,sample_id,digit_index,digit_label,image_path).
    #[arg(long, conflicts_with = "synth")]
    pub manifest: Option<PathBuf>,
    /// Synthetic corpus configuration (JSON); omitted fields take defaults.
    #[arg(long)]
    pub synth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Synthetic corpus configuration (JSON); defaults when omitted.
    #[arg(long)]
    pub synth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value = "f1,f2,f3")]
    pub features: String,
    /// Extraction parameters (JSON); defaults when omitted.
    #[arg(long)]
    pub extraction: Option<PathBuf>,
    /// Cache directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: Source,
    /// Feature kinds: any of f1, f2, f3 (both axes), f3h, f3v.
    #[arg(long, default_value = "f1,f2")]
    pub features: String,
    #[arg(long, default_value = "digitwise")]
    pub mode: ComparisonMode,
    /// Enrolment size.
    #[arg(long, conflicts_with = "enrol_range")]
    pub enrol: Option<usize>,
    /// Inclusive enrolment-size range, e.g. 1..10.
    #[arg(long)]
    pub enrol_range: Option<EnrolRange>,
    /// Largest enrolment size accepted.
    #[arg(long, default_value_t = 10)]
    pub max_enrol: usize,
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Precomputed embeddings (CSV); replaces handcrafted features.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Extraction parameters (JSON); defaults when omitted.
    #[arg(long)]
    pub extraction: Option<PathBuf>,
    /// Feature cache directory (default: <out>/cache).
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Number of CMC ranks reported.
    #[arg(long, default_value_t = 10)]
    pub cmc_depth: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolChoice {
    Identification,
    Verification,
    Both,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub protocol: ProtocolChoice,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report files or directories searched recursively for reports.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory for summary.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnrolRange {
    pub first: usize,
    pub last: usize,
}

impl FromStr for EnrolRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("expected A..B, got '{s}'"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
        let (first, last) = (parse(a)?, parse(b)?);
        if first == 0 || first > last {
            return Err(format!("range {s} must satisfy 1 <= A <= B"));
        }
        Ok(Self { first, last })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| commands::run(cli.command))),
        None => commands::run(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
