use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cellattr", version, about = "Cell-level attribution for table question answering")]
pub struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a source dataset release into benchmark JSON-lines.
    Import(ImportArgs),
    /// Validate datasets and summarise split counts and sizes.
    Stats(StatsArgs),
    /// Run the attribution pipeline over a dataset.
    Attribute(AttributeArgs),
    /// Score attribution results against gold cells.
    Evaluate(EvaluateArgs),
    /// Reference-free fact-alignment scoring of attribution results.
    Fairscore(FairscoreArgs),
    /// Run every pipeline variant and compare them.
    Ablate(AblateArgs),
    /// Manage the on-disk response cache.
    #[command(subcommand)]
    Cache(CacheCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Totto,
    Fetaqa,
    Aitqa,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[arg(long, value_enum)]
    pub source: Source,
    /// Source release file (JSON-lines; for AITQA the questions file).
    #[arg(long)]
    pub input: PathBuf,
    /// AITQA tables file.
    #[arg(long)]
    pub tables: Option<PathBuf>,
    /// Phrase-level annotations, JSON-lines of {"id", "gold"}.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Also write rejected instances as JSON-lines errors.
    #[arg(long)]
    pub errors: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset files to summarise.
    #[arg(long = "dataset")]
    pub datasets: Vec<PathBuf>,
    /// Manifest listing datasets with expected split counts.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: Format,
    /// Write the full JSON report here.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Live,
    Cache,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    /// Qwen2.5-7B-Instruct, usually served from a local OpenAI-compatible endpoint.
    Lite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JudgeArg {
    Llm,
    Nli,
}

/// Model and gateway settings shared by every command that calls a model.
#[derive(Debug, Default, Args)]
pub struct GatewayArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Recorded transcript to replay.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Append every answered request to this transcript.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Worker threads and concurrent model requests.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum)]
    pub judge: Option<JudgeArg>,
    #[arg(long)]
    pub nli_url: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Gold,
    Silver,
    All,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    /// Run on a random subset of this many instances.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub gateway: GatewayArgs,
    #[arg(long)]
    pub variant: Option<String>,
    /// Output directory for results.jsonl, failures.jsonl and report.json.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSON report path.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Tab-separated report path.
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CellFactsArg {
    Template,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnswerFactsArg {
    Llm,
    Clauses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SupportArg {
    Llm,
    Lexical,
}

#[derive(Debug, Args)]
pub struct FairscoreArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub gateway: GatewayArgs,
    #[arg(long, value_enum)]
    pub cell_facts: Option<CellFactsArg>,
    #[arg(long, value_enum)]
    pub answer_facts: Option<AnswerFactsArg>,
    #[arg(long, value_enum)]
    pub support: Option<SupportArg>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub gateway: GatewayArgs,
    /// Output directory: per-variant results and failures plus report.json.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum CacheCommand {
    /// Delete temporary, unreadable and (optionally) unreferenced entries.
    Gc {
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// Keep only entries whose hash appears in one of these transcripts.
        #[arg(long = "keep-transcript")]
        keep: Vec<PathBuf>,
    },
    /// Summarise a cache directory or a transcript file.
    Inspect {
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}
