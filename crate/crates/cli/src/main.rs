use std::path::PathBuf;
use std::process::ExitCode;

use chainkey_core::eval::MatcherKind;
use chainkey_core::llm::DEFAULT_TEMPERATURE;
use chainkey_core::pipeline::{DEFAULT_CHUNK_LIMIT, Task};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod backend;
mod commands;
mod exit;

#[derive(Parser)]
#[command(name = "chainkey", version, about = "Incremental summarization with schema-constrained memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize one entity record or one book under one or more strategies.
    Summarize(SummarizeArgs),
    /// Run every record of a dataset under each strategy and score it.
    Bench(BenchArgs),
    /// Score a saved run: P/R/F1 against gold, or coherence for books.
    Eval(EvalArgs),
    /// Split a text file into token-limited chunks.
    Chunk(ChunkArgs),
}

#[derive(Args)]
struct BackendArgs {
    /// http:<url>, scripted:<cassette>, record:<cassette> or synthetic:<spec>.
    #[arg(long)]
    backend: String,
    /// Backend answering for a record: backend.
    #[arg(long, value_name = "BACKEND")]
    record_from: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// entity, book, or a schema file. Defaults to the task's schema.
    #[arg(long)]
    schema: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    temperature: f64,
    /// Memory limit in tokens. Book runs default to 1000.
    #[arg(long, value_name = "K")]
    token_budget: Option<usize>,
    /// Book chunk size in tokens.
    #[arg(long, value_name = "N")]
    chunk_limit: Option<usize>,
    /// Format of the final summary. Defaults to the strategy's memory format.
    #[arg(long, value_enum)]
    final_format: Option<FormatArg>,
    /// When generate-merge removes duplicates.
    #[arg(long, value_enum, default_value_t = DedupArg::PerTurn)]
    dedup: DedupArg,
    /// What to do when compression cannot reach the budget.
    #[arg(long, value_enum, default_value_t = FallbackArg::TruncateValues)]
    fallback: FallbackArg,
    /// Compression attempts before the fallback applies.
    #[arg(long, default_value_t = 3)]
    compress_retries: u32,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long, default_value = "entity")]
    task: Task,
    /// A strategy name, a comma-separated list, or `all`.
    #[arg(long)]
    strategy: String,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    backend: BackendArgs,
    /// Entity record (JSON) or book text.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Output file, or a directory when several strategies run. Stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Book title. Defaults to the file stem.
    #[arg(long)]
    subject: Option<String>,
    /// Leave out the timestamp so reruns are byte-identical.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON-lines dataset of entity records.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Comma-separated strategy names, or `all`.
    #[arg(long, default_value = "all")]
    strategies: String,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long, default_value = "exact")]
    matcher: MatcherKind,
    /// Backend for the llm matcher. Defaults to --backend.
    #[arg(long, value_name = "BACKEND")]
    judge_backend: Option<String>,
    /// Runs in flight at once.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// JSON report. Stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the table as markdown.
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// A run file written by `summarize`.
    #[arg(long, value_name = "FILE")]
    run: PathBuf,
    /// Entity record or dataset holding the gold summaries.
    #[arg(long, value_name = "FILE")]
    gold: Option<PathBuf>,
    #[arg(long, default_value = "exact")]
    matcher: MatcherKind,
    /// Evaluator for book runs and the llm matcher.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long, value_name = "BACKEND")]
    record_from: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    temperature: f64,
    /// Sentences judged at once.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct ChunkArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CHUNK_LIMIT)]
    limit: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum DedupArg {
    PerTurn,
    AtEnd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FallbackArg {
    TruncateValues,
    Fail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { exit::CONFIG } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Summarize(args) => commands::summarize(args),
        Command::Bench(args) => commands::bench(args),
        Command::Eval(args) => commands::eval(args),
        Command::Chunk(args) => commands::chunk(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit::code_for(&err))
        }
    }
}

/// The error chain on one line. Many core errors already quote their source,
/// so causes whose text is already shown are skipped.
fn describe(err: &anyhow::Error) -> String {
    let mut out = err.to_string();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !out.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
    }
    out
}
