use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lexzipf::corpus::TokenPattern;
use lexzipf::generator::SamplingMode;
use lexzipf::profile::{ProfileKind, DEFAULT_K_MAX, DEFAULT_K_MIN};

#[derive(Debug, Parser)]
#[command(
    name = "lexzipf",
    version,
    about = "Word-model rank-frequency laws, simulation and Zipf fits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic block table and exponents of a model.
    Theory(TheoryArgs),
    /// Simulate tokens (or a raw symbol stream) from a model.
    Generate(GenerateArgs),
    /// Fit the Zipf exponent of a rank table, block table or token file.
    Fit(FitArgs),
    /// Count tokens of plain-text files.
    Corpus(CorpusArgs),
    /// Compare an empirical table with a model.
    Compare(CompareArgs),
    /// Re-execute a run from its manifest and check the outputs match.
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Theory(_) => "theory",
            Command::Generate(_) => "generate",
            Command::Fit(_) => "fit",
            Command::Corpus(_) => "corpus",
            Command::Compare(_) => "compare",
            Command::Rerun(_) => "rerun",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory, created if missing.
    #[arg(long, env = "LEXZIPF_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Alphabet size.
    #[arg(long, default_value_t = 26)]
    pub m: u32,
    /// Blank (space) probability.
    #[arg(long, default_value_t = 0.18)]
    pub q: f64,
    /// Survival profile: `unfiltered`, `gamma:C=..,g=..`,
    /// `poly:c0=..,c1=..,b=..` or `table:k3=10,...,default=<profile>`.
    #[arg(long, default_value = "unfiltered")]
    pub profile: ProfileKind,
    /// Shortest word length in the model; 0 selects compatibility mode.
    #[arg(long, default_value_t = DEFAULT_K_MIN)]
    pub k_min: u32,
    /// Longest word length in the model.
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    pub k_max: u32,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write the first this-many ranks as a per-rank table.
    #[arg(long)]
    pub expand: Option<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TokenFormat {
    /// One spelled token per line.
    Text,
    /// Binary (length, index) records.
    Compact,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of filtered tokens.
    #[arg(long, conflicts_with = "symbols", required_unless_present = "symbols")]
    pub tokens: Option<u64>,
    /// Number of raw symbols (unfiltered stream, segmented at blanks).
    #[arg(long)]
    pub symbols: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "renormalized")]
    pub mode: SamplingMode,
    /// Tokens per parallel chunk; omitted runs one sequential chunk.
    #[arg(long)]
    pub chunk_tokens: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TokenFormat,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethodArg {
    /// Least squares, one point per rank.
    Ols,
    /// Least squares, one point per length block (block CSV input).
    Blocks,
    /// Discrete power-law maximum likelihood.
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UpperArg {
    /// Normalize over ranks up to the table length.
    TableEnd,
    /// Normalize over all ranks from r_min.
    Unbounded,
}

#[derive(Debug, Clone, Args)]
pub struct WindowArgs {
    /// First rank of the fit window.
    #[arg(long, default_value_t = 50)]
    pub r_min: u64,
    /// Last rank of the fit window; defaults to the last rank with at least
    /// --min-tail-count tokens (or the table end without counts).
    #[arg(long)]
    pub r_max: Option<u64>,
    #[arg(long, default_value_t = 5)]
    pub min_tail_count: u64,
    /// Support of the likelihood fit.
    #[arg(long, value_enum, default_value = "table-end")]
    pub mle_upper: UpperArg,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Rank CSV, block CSV, compact token file or text token file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "ols")]
    pub method: FitMethodArg,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TokenArgs {
    /// Keep letter case.
    #[arg(long)]
    pub keep_case: bool,
    /// Keep non-alphanumeric characters inside whitespace blocks.
    #[arg(long)]
    pub keep_punctuation: bool,
    #[arg(long, default_value = "whitespace_blocks")]
    pub pattern: TokenPattern,
    #[arg(long, default_value_t = 1)]
    pub min_token_length: usize,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Plain-text files.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[command(flatten)]
    pub tokens: TokenArgs,
    /// Head sizes to report.
    #[arg(long, value_delimiter = ',', default_value = "10,20")]
    pub top: Vec<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Empirical rank CSV.
    #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
    pub table: Option<PathBuf>,
    /// Per-length block CSV of a simulated table, enabling block fits.
    #[arg(long, requires = "table")]
    pub blocks: Option<PathBuf>,
    /// Plain-text files to ingest instead of a table.
    #[arg(long, num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    #[command(flatten)]
    pub tokens: TokenArgs,
    /// Set q from the corpus mean token length, q = 1/(1 + mean).
    #[arg(long, requires = "corpus")]
    pub calibrate_q: bool,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long, default_value_t = 5)]
    pub bins_per_decade: u32,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    /// manifest.json of an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}
