mod commands;
mod manifest;
mod providers;

use std::fmt::Display;
use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use swd_core::corpus::Split;
use swd_core::ensemble::{Gap, RoutingConfig};
use swd_core::llm::MessageLayout;
use swd_core::prompting::{template_checksums, PromptMode};

use providers::ProviderChoice;

/// Scientific web discourse detection for tweets.
#[derive(Debug, Parser)]
#[command(name = "swd")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label counts, overlaps and the reference-implies-entity audit for a dataset.
    Stats(StatsArgs),
    /// Embed a labeled dataset into an example index file.
    Index(IndexArgs),
    /// List the k examples most similar to a query.
    Retrieve(RetrieveArgs),
    /// Classify a dataset with the routed transformer/LLM ensemble.
    Predict(Box<PredictArgs>),
    /// Combine transformer and LLM prediction files by routing.
    Fuse(FuseArgs),
    /// Score a predictions file against gold labels.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct StatsArgs {
    path: PathBuf,
    /// Defaults to train when the file has a labels column, eval otherwise.
    #[arg(long)]
    split: Option<Split>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IndexArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// hash[:dim] or openai:<model>[:dim]
    #[arg(long, default_value = "hash")]
    provider: ProviderChoice,
    #[arg(long)]
    base_url: Option<String>,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(short, long, default_value_t = 5)]
    k: usize,
    /// Defaults to the provider recorded in the index.
    #[arg(long)]
    provider: Option<ProviderChoice>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Zero,
    Few,
}

impl From<ModeArg> for PromptMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Zero => PromptMode::ZeroShot,
            ModeArg::Few => PromptMode::FewShot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LayoutArg {
    SystemUser,
    UserOnly,
}

impl From<LayoutArg> for MessageLayout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::SystemUser => MessageLayout::SystemAndUser,
            LayoutArg::UserOnly => MessageLayout::UserOnly,
        }
    }
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Dataset to classify.
    #[arg(long)]
    data: PathBuf,
    /// Defaults to dev when the file has a labels column, eval otherwise.
    #[arg(long)]
    split: Option<Split>,
    /// Predictions TSV; `.meta.json` and `.manifest.json` sidecars are written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "few")]
    mode: ModeArg,
    /// Example index for few-shot prompts.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Defaults to the provider recorded in the index.
    #[arg(long)]
    provider: Option<ProviderChoice>,
    #[arg(short, long, default_value_t = 5)]
    k: usize,
    /// Exclude a stored example with the query's own index. On by default for the train split.
    #[arg(long)]
    leave_one_out: Option<bool>,
    #[arg(long, default_value = "gpt-4o")]
    model: String,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    #[arg(long, default_value_t = 128)]
    max_tokens: u32,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
    #[arg(long, value_enum, default_value = "system-user")]
    message_layout: LayoutArg,
    /// Chat endpoint base; falls back to OPENAI_BASE_URL.
    #[arg(long)]
    base_url: Option<String>,
    /// JSONL response cache, created if absent.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Offline backend: constant:a,b,c | echo:<tsv> | nearest | fixed:<text>
    #[arg(long)]
    mock: Option<commands::MockChoice>,
    /// Transformer predictions TSV.
    #[arg(long)]
    transformer: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Treat a probability equal to the threshold as negative.
    #[arg(long)]
    strict_threshold: bool,
    /// Source per category, e.g. T,L,T. Defaults to T,L,T with --transformer, L,L,L without.
    #[arg(long)]
    routing: Option<RoutingConfig>,
    /// Force Cat3 wherever the fused Cat2 label is 1.
    #[arg(long)]
    enforce_dependency: bool,
}

#[derive(Debug, Args)]
struct FuseArgs {
    #[arg(long)]
    transformer: PathBuf,
    /// `index<TAB>labels` TSV of LLM predictions.
    #[arg(long)]
    llm: PathBuf,
    #[arg(long, default_value = "T,L,T")]
    routing: RoutingConfig,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    strict_threshold: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// `index<TAB>labels` TSV or a transformer predictions TSV.
    #[arg(long)]
    pred: PathBuf,
    /// Any TSV with `index` and `labels` columns.
    #[arg(long)]
    gold: PathBuf,
    /// Row label; defaults to the predictions file stem.
    #[arg(long)]
    name: Option<String>,
    /// Score for a 0/0 precision or recall.
    #[arg(long, default_value_t = 0.0)]
    zero_division: f64,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{} tweet(s) could not be classified", gaps.len())]
    Partial { gaps: Vec<Gap> },
}

impl CliError {
    pub fn input(e: impl Display) -> Self {
        CliError::Input(e.to_string())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Partial { .. } => 3,
        }
    }
}

fn long_version() -> String {
    let mut s = env!("CARGO_PKG_VERSION").to_owned();
    for (name, sum) in template_checksums() {
        s.push_str(&format!("\n{name} sha256:{sum}"));
    }
    s
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .without_time()
        .init();

    let matches = Cli::command()
        .version(env!("CARGO_PKG_VERSION"))
        .long_version(long_version())
        .get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };

    let result = match cli.command {
        Command::Stats(a) => commands::stats(a),
        Command::Index(a) => commands::index(a),
        Command::Retrieve(a) => commands::retrieve(a),
        Command::Predict(a) => commands::predict(*a),
        Command::Fuse(a) => commands::fuse(a),
        Command::Evaluate(a) => commands::evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Partial { gaps } = &e {
                for gap in gaps {
                    eprintln!("  gap {}: {}", gap.index, gap.error);
                }
            }
            ExitCode::from(e.code())
        }
    }
}
