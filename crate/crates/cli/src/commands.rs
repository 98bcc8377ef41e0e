use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use chainkey_core::dataset::{load_records, parse_records, EntityStreamRecord};
use chainkey_core::eval::{
    coherence_eval, evaluate_run, Matcher, MatcherKind, ResultsTable, RunEvaluation,
};
use chainkey_core::llm::LlmBackend;
use chainkey_core::memory::{chunk_document, ByteQuarterTokenizer, Fallback};
use chainkey_core::pipeline::{
    run_strategy, DedupMode, DocumentStream, OutputFormat, RunConfig, RunResult, Strategy, Task,
    DEFAULT_CHUNK_LIMIT,
};
use chainkey_core::{render_text_summary, Schema};
use serde_json::{json, Value};

use crate::backend::{self, BackendSpec};
use crate::exit::ConfigError;
use crate::{
    BackendArgs, BenchArgs, ChunkArgs, DedupArg, EvalArgs, FallbackArg, FormatArg, RunArgs,
    SummarizeArgs,
};

impl RunArgs {
    fn config(&self, strategy: Strategy, task: Task) -> Result<RunConfig> {
        let mut config = RunConfig::new(strategy, task);
        if let Some(reference) = &self.schema {
            config.schema =
                Schema::load(reference).with_context(|| format!("loading schema `{reference}`"))?;
        }
        config.temperature = self.temperature;
        if self.token_budget.is_some() {
            config.token_budget = self.token_budget;
        }
        if self.chunk_limit.is_some() {
            config.chunk_limit = self.chunk_limit;
        }
        if let Some(format) = self.final_format {
            config.output_format = match format {
                FormatArg::Json => OutputFormat::Json,
                FormatArg::Text => OutputFormat::Text,
            };
        }
        config.dedup = match self.dedup {
            DedupArg::PerTurn => DedupMode::PerTurn,
            DedupArg::AtEnd => DedupMode::AtEnd,
        };
        config.fallback = match self.fallback {
            FallbackArg::TruncateValues => Fallback::TruncateValues,
            FallbackArg::Fail => Fallback::Fail,
        };
        config.compress_retries = self.compress_retries;
        config.check()?;
        Ok(config)
    }
}

fn open_backend(args: &BackendArgs) -> Result<Box<dyn LlmBackend>> {
    let spec = BackendSpec::parse(&args.backend)?;
    let inner = args.record_from.as_deref().map(BackendSpec::parse).transpose()?;
    backend::open(&spec, inner.as_ref())
}

fn parse_strategies(text: &str) -> Result<Vec<Strategy>> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(Strategy::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in text.split(',').map(str::trim).filter(|n| !n.is_empty()) {
        let strategy: Strategy = name.parse().map_err(ConfigError)?;
        if !out.contains(&strategy) {
            out.push(strategy);
        }
    }
    if out.is_empty() {
        return Err(ConfigError("no strategies given".into()).into());
    }
    Ok(out)
}

fn stamp(mut value: Value, deterministic: bool) -> Value {
    if !deterministic {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        if let Value::Object(map) = &mut value {
            map.insert("generated_at_unix".into(), json!(now));
        }
    }
    value
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_json(path: Option<&Path>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_text(path, &text)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// A single record as JSON, or a one-record JSON-lines file.
fn load_record(path: &Path, schema: &Schema) -> Result<EntityStreamRecord> {
    let text = read(path)?;
    if let Ok(mut record) = serde_json::from_str::<EntityStreamRecord>(&text) {
        record.check()?;
        record.conform_gold(schema)?;
        return Ok(record);
    }
    let mut records = parse_records(&text, path, schema)?;
    match records.len() {
        1 => Ok(records.remove(0)),
        n => Err(ConfigError(format!(
            "{} holds {n} records; summarize takes one",
            path.display()
        ))
        .into()),
    }
}

pub fn summarize(args: SummarizeArgs) -> Result<()> {
    let strategies = parse_strategies(&args.strategy)?;
    let configs = strategies
        .iter()
        .map(|&s| args.run.config(s, args.task))
        .collect::<Result<Vec<_>>>()?;
    let several = configs.len() > 1;
    if several && !args.out.as_deref().is_some_and(Path::is_dir) {
        return Err(ConfigError("several strategies need --out pointing at a directory".into()).into());
    }
    let stream = match args.task {
        Task::Entity => load_record(&args.input, &configs[0].schema)?.stream(),
        Task::Book => {
            let text = read(&args.input)?;
            let title = args.subject.clone().unwrap_or_else(|| {
                args.input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "book".into())
            });
            let limit = configs[0].chunk_limit.unwrap_or(DEFAULT_CHUNK_LIMIT);
            DocumentStream::from_book(title, &text, &ByteQuarterTokenizer, limit)
        }
    };
    let backend = open_backend(&args.backend)?;
    for config in &configs {
        let result = run_strategy(&stream, &*backend, config)
            .with_context(|| format!("summarizing `{}` with {}", stream.subject, config.strategy))?;
        let value = stamp(serde_json::to_value(&result)?, args.deterministic);
        let out = match &args.out {
            Some(dir) if several => Some(dir.join(format!("{}.json", config.strategy.as_str()))),
            other => other.clone(),
        };
        write_json(out.as_deref(), &value)?;
        eprintln!(
            "{}: {} turn(s), {} final token(s)",
            config.strategy.label(),
            result.turns.len(),
            result.turns.last().map_or(0, |t| t.memory_tokens)
        );
    }
    Ok(())
}

fn matcher<'a>(kind: MatcherKind, judge: Option<&'a dyn LlmBackend>, temperature: f64) -> Result<Matcher<'a>> {
    Ok(match kind {
        MatcherKind::Exact => Matcher::Exact,
        MatcherKind::Fuzzy => Matcher::Fuzzy,
        MatcherKind::Llm => Matcher::Llm {
            backend: judge.ok_or_else(|| ConfigError("the llm matcher needs a backend".into()))?,
            temperature,
        },
    })
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let strategies = parse_strategies(&args.strategies)?;
    let configs = strategies
        .iter()
        .map(|&s| args.run.config(s, Task::Entity))
        .collect::<Result<Vec<_>>>()?;
    if args.jobs == 0 {
        return Err(ConfigError("--jobs must be at least 1".into()).into());
    }
    let records = load_records(&args.input, &configs[0].schema)?;
    if records.is_empty() {
        return Err(ConfigError(format!("{} holds no records", args.input.display())).into());
    }
    let backend = open_backend(&args.backend)?;
    let judge_backend = match &args.judge_backend {
        Some(spec) => Some(backend::open(&BackendSpec::parse(spec)?, None)?),
        None => None,
    };
    let judge: &dyn LlmBackend = judge_backend.as_deref().unwrap_or(&*backend);
    let matcher = matcher(args.matcher, Some(judge), args.run.temperature)?;

    // Work items are (strategy, record) in report order.
    let items: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|s| (0..records.len()).map(move |r| (s, r)))
        .collect();
    let score = |&(s, r): &(usize, usize)| -> Result<RunEvaluation> {
        let record = &records[r];
        let config = &configs[s];
        let result = run_strategy(&record.stream(), &*backend, config)
            .with_context(|| format!("summarizing `{}` with {}", record.entity, config.strategy))?;
        evaluate_run(&result, record, &matcher)
            .with_context(|| format!("scoring `{}` with {}", record.entity, config.strategy))
    };
    let jobs = args.jobs.min(items.len());
    let mut scored: Vec<Option<Result<RunEvaluation>>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let workers: Vec<_> = (0..jobs)
            .map(|w| {
                let (items, score) = (&items, &score);
                scope.spawn(move || {
                    (w..items.len())
                        .step_by(jobs)
                        .map(|i| (i, score(&items[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for worker in workers {
            for (i, outcome) in worker.join().expect("bench worker panicked") {
                scored[i] = Some(outcome);
            }
        }
    });
    let scored = scored
        .into_iter()
        .map(|s| s.expect("every item is scored"))
        .collect::<Result<Vec<_>>>()?;

    let mut table = ResultsTable::default();
    let mut blocks = Vec::new();
    for (s, config) in configs.iter().enumerate() {
        let entities = &scored[s * records.len()..(s + 1) * records.len()];
        let aggregates: Vec<_> = entities.iter().map(|e| e.aggregate).collect();
        table.push_strategy(config.strategy.label(), &aggregates)?;
        blocks.push(json!({ "strategy": config.strategy.label(), "entities": entities }));
    }
    let report = json!({
        "matcher": args.matcher,
        "records": records.len(),
        "config": {
            "temperature": configs[0].temperature,
            "token_budget": configs[0].token_budget,
            "schema": configs[0].schema.name,
        },
        "strategies": blocks,
        "table": table,
    });
    write_json(args.out.as_deref(), &stamp(report, args.deterministic))?;
    let markdown = table.to_markdown();
    if let Some(path) = &args.table {
        write_text(Some(path), &markdown)?;
    }
    if let Some(path) = &args.csv {
        write_text(Some(path), &table.to_csv())?;
    }
    if args.out.is_some() {
        print!("{markdown}");
    } else {
        eprint!("{markdown}");
    }
    Ok(())
}

fn find_gold(path: &Path, subject: &str, schema: &Schema) -> Result<EntityStreamRecord> {
    let text = read(path)?;
    let records = match serde_json::from_str::<EntityStreamRecord>(&text) {
        Ok(mut record) => {
            record.check()?;
            record.conform_gold(schema)?;
            vec![record]
        }
        Err(_) => parse_records(&text, path, schema)?,
    };
    records
        .into_iter()
        .find(|r| r.entity == subject)
        .ok_or_else(|| ConfigError(format!("{} has no record for `{subject}`", path.display())).into())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let run: RunResult = serde_json::from_str(&read(&args.run)?)
        .with_context(|| format!("parsing run file {}", args.run.display()))?;
    let backend = match &args.backend {
        Some(spec) => {
            let inner = args.record_from.as_deref().map(BackendSpec::parse).transpose()?;
            Some(backend::open(&BackendSpec::parse(spec)?, inner.as_ref())?)
        }
        None => None,
    };
    let (value, human) = match run.config.task {
        Task::Entity => {
            let gold_path = args
                .gold
                .as_deref()
                .ok_or_else(|| ConfigError("entity runs need --gold".into()))?;
            let record = find_gold(gold_path, &run.subject, &run.config.schema)?;
            let matcher = matcher(args.matcher, backend.as_deref(), args.temperature)?;
            let evaluation = evaluate_run(&run, &record, &matcher)?;
            let human = entity_table(&evaluation);
            (serde_json::to_value(&evaluation)?, human)
        }
        Task::Book => {
            let evaluator = backend
                .as_deref()
                .ok_or_else(|| ConfigError("book runs need an evaluator --backend".into()))?;
            if args.jobs == 0 {
                return Err(ConfigError("--jobs must be at least 1".into()).into());
            }
            let summary = match run.final_summary.as_text() {
                Some(text) => text.to_string(),
                None => render_text_summary(run.final_summary.as_json().expect("snapshot is json or text")),
            };
            let report = coherence_eval(&summary, evaluator, args.temperature, args.jobs)?;
            let human = format!(
                "coherence_score: {:.3} ({} of {} sentence(s) confusing)\n",
                report.coherence_score,
                report.confusing_count(),
                report.sentences.len()
            );
            (
                json!({ "subject": run.subject, "strategy": run.config.strategy.label(), "coherence": report }),
                human,
            )
        }
    };
    write_json(args.out.as_deref(), &stamp(value, args.deterministic))?;
    if args.out.is_some() {
        print!("{human}");
    } else {
        eprint!("{human}");
    }
    Ok(())
}

fn entity_table(evaluation: &RunEvaluation) -> String {
    let mut out = format!(
        "{} ({})\n| Turn | P | R | F1 |\n|---|---:|---:|---:|\n",
        evaluation.subject, evaluation.strategy
    );
    let row = |label: String, m: &chainkey_core::eval::EntityMetrics| {
        format!(
            "| {label} | {:.1} | {:.1} | {:.1} |\n",
            m.precision * 100.0,
            m.recall * 100.0,
            m.f1 * 100.0
        )
    };
    for (turn, metrics) in evaluation.per_turn.iter().enumerate() {
        out.push_str(&row(turn.to_string(), metrics));
    }
    out.push_str(&row("start".into(), &evaluation.aggregate.start));
    out.push_str(&row("last".into(), &evaluation.aggregate.last));
    out.push_str(&row("Avg".into(), &evaluation.aggregate.avg));
    out
}

pub fn chunk(args: ChunkArgs) -> Result<()> {
    if args.limit == 0 {
        return Err(ConfigError("--limit must be at least 1".into()).into());
    }
    let text = read(&args.input)?;
    let chunks = chunk_document(&ByteQuarterTokenizer, &text, args.limit);
    write_json(args.out.as_deref(), &serde_json::to_value(&chunks)?)?;
    eprintln!("{} chunk(s) at limit {}", chunks.len(), args.limit);
    Ok(())
}
