//! Strategy runners: fold a document stream into a summary turn by turn.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::doc::{to_compact, SummaryDoc};
use crate::llm::{
    bindings, extract_json, parse_cok_response, render_prompt, Bindings, LlmBackend, LlmError,
    LlmRequest, TemplateId, DEFAULT_TEMPERATURE,
};
use crate::memory::{
    chunk_document, enforce_budget, enforce_text_budget, exact_dedup, programmatic_merge,
    BudgetError, ByteQuarterTokenizer, Chunk, CompressionPolicy, CompressionReport, Fallback,
    MergeError, StructuredMemory, Tokenizer,
};
use crate::pathpatch::{apply_patch_set, PatchOutcome, PatchSet};
use crate::schema::Schema;

pub use crate::doc::render_text_summary;

/// Default chunk size for book streams, in tokens.
pub const DEFAULT_CHUNK_LIMIT: usize = 2000;
/// Default memory budget for book streams, in tokens.
pub const DEFAULT_BOOK_BUDGET: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    GoText,
    GoJson,
    GuText,
    GuJson,
    GmJson,
    CokJson,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::GoText,
        Strategy::GoJson,
        Strategy::GuText,
        Strategy::GuJson,
        Strategy::GmJson,
        Strategy::CokJson,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::GoText => "go_text",
            Strategy::GoJson => "go_json",
            Strategy::GuText => "gu_text",
            Strategy::GuJson => "gu_json",
            Strategy::GmJson => "gm_json",
            Strategy::CokJson => "cok_json",
        }
    }

    /// Display label used in report tables, e.g. `CoK_json`.
    pub fn label(self) -> &'static str {
        match self {
            Strategy::GoText => "GO_text",
            Strategy::GoJson => "GO_json",
            Strategy::GuText => "GU_text",
            Strategy::GuJson => "GU_json",
            Strategy::GmJson => "GM_json",
            Strategy::CokJson => "CoK_json",
        }
    }

    /// The format memory is kept in during the run.
    pub fn memory_format(self) -> OutputFormat {
        match self {
            Strategy::GoText | Strategy::GuText => OutputFormat::Text,
            _ => OutputFormat::Json,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase();
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == wanted)
            .ok_or_else(|| {
                let names: Vec<&str> = Strategy::ALL.iter().map(|s| s.as_str()).collect();
                format!("unknown strategy `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Text,
}

impl OutputFormat {
    fn prompt_name(self) -> &'static str {
        match self {
            OutputFormat::Json => "JSON",
            OutputFormat::Text => "text",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Entity,
    Book,
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entity" => Ok(Task::Entity),
            "book" => Ok(Task::Book),
            other => Err(format!("unknown task `{other}` (expected entity or book)")),
        }
    }
}

/// When generate-merge asks the model to remove duplicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DedupMode {
    PerTurn,
    AtEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub task: Task,
    pub schema: Schema,
    /// Format of the final summary.
    pub output_format: OutputFormat,
    pub temperature: f64,
    pub token_budget: Option<usize>,
    pub chunk_limit: Option<usize>,
    pub dedup: DedupMode,
    pub compress_retries: u32,
    pub fallback: Fallback,
}

impl RunConfig {
    /// Task defaults: entity streams are unbudgeted; book streams use
    /// 2000-token chunks and a 1000-token memory.
    pub fn new(strategy: Strategy, task: Task) -> Self {
        let (schema, token_budget, chunk_limit) = match task {
            Task::Entity => (crate::schema::entity_schema(), None, None),
            Task::Book => (
                crate::schema::book_schema(),
                Some(DEFAULT_BOOK_BUDGET),
                Some(DEFAULT_CHUNK_LIMIT),
            ),
        };
        RunConfig {
            strategy,
            task,
            schema,
            output_format: strategy.memory_format(),
            temperature: DEFAULT_TEMPERATURE,
            token_budget,
            chunk_limit,
            dedup: DedupMode::PerTurn,
            compress_retries: 3,
            fallback: Fallback::TruncateValues,
        }
    }

    pub fn check(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if self.strategy.memory_format() == OutputFormat::Text && self.output_format == OutputFormat::Json {
            return bad(format!("{} keeps text memory and cannot produce a JSON summary", self.strategy));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.token_budget == Some(0) {
            return bad("token budget must be at least 1".into());
        }
        if self.chunk_limit == Some(0) {
            return bad("chunk limit must be at least 1".into());
        }
        Ok(())
    }

    fn policy(&self) -> Option<CompressionPolicy> {
        self.token_budget.map(|budget| CompressionPolicy {
            budget,
            max_retries: self.compress_retries,
            fallback: self.fallback,
        })
    }
}

/// The documents of one run and what they are about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentStream {
    /// Entity name, or book title.
    pub subject: String,
    pub documents: Vec<String>,
}

impl DocumentStream {
    pub fn new(subject: impl Into<String>, documents: Vec<String>) -> Self {
        DocumentStream {
            subject: subject.into(),
            documents,
        }
    }

    /// Splits a whole book into chunks of at most `limit` tokens.
    pub fn from_book(title: impl Into<String>, text: &str, tokenizer: &dyn Tokenizer, limit: usize) -> Self {
        let documents = chunk_document(tokenizer, text, limit)
            .into_iter()
            .map(|Chunk { text, .. }| text)
            .collect();
        DocumentStream::new(title, documents)
    }
}

/// Memory at one turn: a structured document or plain text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Snapshot {
    Text(String),
    Json(SummaryDoc),
}

impl Snapshot {
    pub fn as_json(&self) -> Option<&SummaryDoc> {
        match self {
            Snapshot::Json(doc) => Some(doc),
            Snapshot::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Snapshot::Text(text) => Some(text),
            Snapshot::Json(_) => None,
        }
    }

    /// The exact text counted against the token budget.
    pub fn serialized(&self) -> String {
        match self {
            Snapshot::Text(text) => text.clone(),
            Snapshot::Json(doc) => to_compact(doc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: usize,
    pub memory_snapshot: Snapshot,
    pub memory_tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch_outcome: Option<PatchOutcome>,
    pub prompts_issued: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compression: Option<CompressionReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub subject: String,
    pub config: RunConfig,
    pub turns: Vec<TurnRecord>,
    pub final_summary: Snapshot,
}

impl RunResult {
    pub fn last_snapshot(&self) -> &Snapshot {
        &self.turns.last().expect("runs have at least one turn").memory_snapshot
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("no documents to summarize")]
    NoDocuments,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("turn {turn}: `{template}` call failed: {source}")]
    Llm {
        turn: usize,
        template: TemplateId,
        #[source]
        source: LlmError,
    },
    #[error("turn {turn}: unusable `{template}` reply after re-ask: {message}")]
    Parse {
        turn: usize,
        template: TemplateId,
        message: String,
    },
    #[error("turn {turn}: token budget: {source}")]
    Budget {
        turn: usize,
        #[source]
        source: BudgetError,
    },
    #[error("turn {turn}: {source}")]
    Merge {
        turn: usize,
        #[source]
        source: MergeError,
    },
}

/// A run that stopped early. `turns` holds every turn that completed.
#[derive(Debug, thiserror::Error)]
#[error("{error} ({} turn(s) completed)", turns.len())]
pub struct RunFailure {
    #[source]
    pub error: PipelineError,
    pub turns: Vec<TurnRecord>,
}

/// Rendered prompts use pretty JSON; single-field schemas are shown in the
/// flat form of the prompt examples.
fn prompt_view(schema: &Schema, doc: &SummaryDoc) -> String {
    let shown = match doc {
        serde_json::Value::Object(map) if schema.root_fields().len() == 1 => {
            map.values().next().cloned().unwrap_or_default()
        }
        other => other.clone(),
    };
    serde_json::to_string_pretty(&shown).expect("JSON values serialize")
}

fn pretty(doc: &SummaryDoc) -> String {
    serde_json::to_string_pretty(doc).expect("JSON values serialize")
}

enum Memory {
    Json(StructuredMemory),
    Text(String),
}

pub struct Pipeline<'a> {
    backend: &'a dyn LlmBackend,
    config: &'a RunConfig,
    tokenizer: &'a dyn Tokenizer,
}

struct Turn {
    index: usize,
    calls: u32,
}

impl<'a> Pipeline<'a> {
    pub fn new(backend: &'a dyn LlmBackend, config: &'a RunConfig) -> Self {
        Pipeline {
            backend,
            config,
            tokenizer: &ByteQuarterTokenizer,
        }
    }

    pub fn with_tokenizer(mut self, tokenizer: &'a dyn Tokenizer) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    pub fn run(&self, stream: &DocumentStream) -> Result<RunResult, RunFailure> {
        let mut turns = Vec::new();
        match self.run_into(stream, &mut turns) {
            Ok(final_summary) => Ok(RunResult {
                subject: stream.subject.clone(),
                config: self.config.clone(),
                turns,
                final_summary,
            }),
            Err(error) => Err(RunFailure { error, turns }),
        }
    }

    fn run_into(&self, stream: &DocumentStream, turns: &mut Vec<TurnRecord>) -> Result<Snapshot, PipelineError> {
        self.config.check()?;
        if stream.documents.is_empty() {
            return Err(PipelineError::NoDocuments);
        }
        let memory = match self.config.strategy {
            Strategy::GoText | Strategy::GoJson => self.generate_once(stream, turns)?,
            Strategy::GuText | Strategy::GuJson => self.generate_update(stream, turns)?,
            Strategy::GmJson => self.generate_merge(stream, turns)?,
            Strategy::CokJson => self.chain_of_key(stream, turns)?,
        };
        let final_turn = turns.len();
        final_summary_at(&memory, Some(self.backend), self.config, final_turn)
    }

    fn format(&self) -> OutputFormat {
        self.config.strategy.memory_format()
    }

    fn generate_once(&self, stream: &DocumentStream, turns: &mut Vec<TurnRecord>) -> Result<Snapshot, PipelineError> {
        let mut turn = Turn { index: 0, calls: 0 };
        let memory = self.generate(stream, &stream.documents, 0, &mut turn)?;
        self.finish_turn(memory, None, turn, turns)
    }

    fn generate_update(&self, stream: &DocumentStream, turns: &mut Vec<TurnRecord>) -> Result<Snapshot, PipelineError> {
        let mut memory = None;
        for (index, document) in stream.documents.iter().enumerate() {
            let mut turn = Turn { index, calls: 0 };
            let next = match memory.take() {
                None => self.generate(stream, std::slice::from_ref(document), index, &mut turn)?,
                Some(current) => self.update(stream, document, current, &mut turn)?,
            };
            memory = Some(self.finish_turn_keep(next, None, turn, turns)?);
        }
        Ok(self.snapshot(memory.as_ref().expect("at least one document")))
    }

    fn generate_merge(&self, stream: &DocumentStream, turns: &mut Vec<TurnRecord>) -> Result<Snapshot, PipelineError> {
        let schema = &self.config.schema;
        let mut doc = schema.empty_doc();
        let mut memory = None;
        let last = stream.documents.len() - 1;
        for (index, document) in stream.documents.iter().enumerate() {
            let mut turn = Turn { index, calls: 0 };
            let fresh = self.generate_doc(stream, std::slice::from_ref(document), index, &mut turn)?;
            let merged = programmatic_merge(&doc, &fresh).map_err(|source| PipelineError::Merge { turn: index, source })?;
            let mut merged = exact_dedup(&merged);
            if self.config.dedup == DedupMode::PerTurn || index == last {
                let prompt = self.render(
                    TemplateId::Dedup,
                    bindings([("existing_summary", prompt_view(schema, &merged))]),
                );
                merged = self.ask_json(TemplateId::Dedup, prompt, &mut turn)?;
            }
            let next = self.finish_turn_keep(Memory::Json(self.structured(merged, index)), None, turn, turns)?;
            doc = match &next {
                Memory::Json(m) => m.doc().clone(),
                Memory::Text(_) => unreachable!("merge keeps JSON memory"),
            };
            memory = Some(next);
        }
        Ok(self.snapshot(memory.as_ref().expect("at least one document")))
    }

    fn chain_of_key(&self, stream: &DocumentStream, turns: &mut Vec<TurnRecord>) -> Result<Snapshot, PipelineError> {
        let schema = &self.config.schema;
        let cok_template = match self.config.task {
            Task::Entity => TemplateId::Cok,
            Task::Book => TemplateId::CokBook,
        };
        let mut memory: Option<Memory> = None;
        for (index, document) in stream.documents.iter().enumerate() {
            let mut turn = Turn { index, calls: 0 };
            let docs = std::slice::from_ref(document);
            let (next, outcome) = match memory.take() {
                None => (self.generate(stream, docs, index, &mut turn)?, None),
                Some(Memory::Json(current)) => {
                    let fresh = self.generate_doc(stream, docs, index, &mut turn)?;
                    let prompt = self.render(
                        cok_template,
                        bindings([
                            ("question", self.question(stream)),
                            ("new_summary", pretty(&fresh)),
                            ("class_text", schema.class_text()),
                            ("partial_summary", pretty(current.doc())),
                        ]),
                    );
                    let patch = self.ask_cok(cok_template, prompt, &mut turn)?;
                    let (doc, outcome) = apply_patch_set(current.doc(), &patch, schema);
                    (Memory::Json(self.structured(doc, index)), Some(outcome))
                }
                Some(Memory::Text(_)) => unreachable!("chain-of-key keeps JSON memory"),
            };
            memory = Some(self.finish_turn_keep(next, outcome, turn, turns)?);
        }
        Ok(self.snapshot(memory.as_ref().expect("at least one document")))
    }

    fn question(&self, stream: &DocumentStream) -> String {
        match self.config.task {
            Task::Entity => format!("Merge the new summary and existing summary of {}.", stream.subject),
            Task::Book => "Merge the new summary and existing summary of the story.".to_string(),
        }
    }

    fn structured(&self, doc: SummaryDoc, index: usize) -> StructuredMemory {
        let mut memory = StructuredMemory::from_doc(self.config.schema.clone(), doc)
            .expect("documents are validated before they become memory")
            .with_budget(self.config.token_budget);
        for _ in 0..index {
            memory.advance();
        }
        memory
    }

    fn snapshot(&self, memory: &Memory) -> Snapshot {
        match memory {
            Memory::Json(m) => Snapshot::Json(m.doc().clone()),
            Memory::Text(t) => Snapshot::Text(t.clone()),
        }
    }

    fn finish_turn(
        &self,
        memory: Memory,
        outcome: Option<PatchOutcome>,
        turn: Turn,
        turns: &mut Vec<TurnRecord>,
    ) -> Result<Snapshot, PipelineError> {
        let memory = self.finish_turn_keep(memory, outcome, turn, turns)?;
        Ok(self.snapshot(&memory))
    }

    // Enforces the budget, then records the turn.
    fn finish_turn_keep(
        &self,
        memory: Memory,
        patch_outcome: Option<PatchOutcome>,
        mut turn: Turn,
        turns: &mut Vec<TurnRecord>,
    ) -> Result<Memory, PipelineError> {
        let budget_err = |source| PipelineError::Budget { turn: turn.index, source };
        let (memory, compression) = match (self.config.policy(), memory) {
            (None, memory) => (memory, None),
            (Some(policy), Memory::Json(m)) => {
                let (m, report) = enforce_budget(&m, self.backend, self.tokenizer, &policy, self.config.temperature)
                    .map_err(budget_err)?;
                (Memory::Json(m), Some(report))
            }
            (Some(policy), Memory::Text(t)) => {
                let (t, report) = enforce_text_budget(
                    &t,
                    turn.index,
                    self.backend,
                    self.tokenizer,
                    &policy,
                    self.config.temperature,
                )
                .map_err(budget_err)?;
                (Memory::Text(t), Some(report))
            }
        };
        if let Some(report) = &compression {
            turn.calls += report.calls;
        }
        let snapshot = self.snapshot(&memory);
        turns.push(TurnRecord {
            turn: turn.index,
            memory_tokens: self.tokenizer.count(&snapshot.serialized()),
            memory_snapshot: snapshot,
            patch_outcome,
            prompts_issued: turn.calls,
            compression,
        });
        Ok(memory)
    }

    fn render(&self, template: TemplateId, bindings: Bindings) -> String {
        render_prompt(template, &bindings).expect("pipeline binds every placeholder")
    }

    fn numbered(documents: &[String], first: usize) -> String {
        documents
            .iter()
            .enumerate()
            .map(|(i, d)| format!("P{}. {}", first + i + 1, d.trim()))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn generate_prompt(&self, stream: &DocumentStream, documents: &[String], first: usize, format: OutputFormat) -> (TemplateId, String) {
        match self.config.task {
            Task::Entity => {
                let template = match format {
                    OutputFormat::Json => TemplateId::GenerateEntity,
                    OutputFormat::Text => TemplateId::GenerateEntityText,
                };
                let prompt = self.render(
                    template,
                    bindings([
                        ("entity_name", stream.subject.clone()),
                        ("paragraph", Self::numbered(documents, first)),
                    ]),
                );
                (template, prompt)
            }
            Task::Book => {
                let prompt = self.render(
                    TemplateId::GenerateBook,
                    bindings([
                        ("special_instruction", special_instruction(format)),
                        ("book_chunk", documents.join("\n\n")),
                        ("output_format", format.prompt_name().to_string()),
                    ]),
                );
                (TemplateId::GenerateBook, prompt)
            }
        }
    }

    fn generate(&self, stream: &DocumentStream, documents: &[String], first: usize, turn: &mut Turn) -> Result<Memory, PipelineError> {
        Ok(match self.format() {
            OutputFormat::Json => {
                let doc = self.generate_doc(stream, documents, first, turn)?;
                Memory::Json(self.structured(doc, turn.index))
            }
            OutputFormat::Text => {
                let (template, prompt) = self.generate_prompt(stream, documents, first, OutputFormat::Text);
                Memory::Text(self.ask_text(template, prompt, turn)?)
            }
        })
    }

    fn generate_doc(&self, stream: &DocumentStream, documents: &[String], first: usize, turn: &mut Turn) -> Result<SummaryDoc, PipelineError> {
        let (template, prompt) = self.generate_prompt(stream, documents, first, OutputFormat::Json);
        self.ask_json(template, prompt, turn)
    }

    fn update(&self, stream: &DocumentStream, document: &str, current: Memory, turn: &mut Turn) -> Result<Memory, PipelineError> {
        let paragraph = Self::numbered(&[document.to_string()], turn.index);
        let schema = &self.config.schema;
        let (template, prompt) = match (self.config.task, &current) {
            (Task::Entity, Memory::Json(m)) => (
                TemplateId::UpdateEntity,
                bindings([
                    ("entity_name", stream.subject.clone()),
                    ("paragraph", paragraph),
                    ("existing_summary", prompt_view(schema, m.doc())),
                ]),
            ),
            (Task::Entity, Memory::Text(t)) => (
                TemplateId::UpdateEntityText,
                bindings([
                    ("entity_name", stream.subject.clone()),
                    ("paragraph", paragraph),
                    ("existing_summary", t.clone()),
                ]),
            ),
            (Task::Book, memory) => (
                TemplateId::UpdateBook,
                bindings([
                    ("special_instruction", special_instruction(self.format())),
                    ("book_chunk", document.to_string()),
                    (
                        "memory",
                        match memory {
                            Memory::Json(m) => pretty(m.doc()),
                            Memory::Text(t) => t.clone(),
                        },
                    ),
                    ("output_format", self.format().prompt_name().to_string()),
                ]),
            ),
        };
        let prompt = self.render(template, prompt);
        Ok(match current {
            Memory::Json(_) => Memory::Json(self.structured(self.ask_json(template, prompt, turn)?, turn.index)),
            Memory::Text(_) => Memory::Text(self.ask_text(template, prompt, turn)?),
        })
    }

    fn call(&self, template: TemplateId, prompt: &str, attempt: u32, turn: &mut Turn) -> Result<String, PipelineError> {
        let llm_err = |source| PipelineError::Llm { turn: turn.index, template, source };
        let request = LlmRequest::new(template, turn.index, prompt)
            .with_temperature(self.config.temperature)
            .map_err(llm_err)?
            .with_attempt(attempt);
        turn.calls += 1;
        let index = turn.index;
        self.backend
            .complete(&request)
            .map(|r| r.text)
            .map_err(|source| PipelineError::Llm { turn: index, template, source })
    }

    // One re-ask with the same prompt, then a hard error.
    fn with_reask<T>(
        &self,
        template: TemplateId,
        prompt: String,
        turn: &mut Turn,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, PipelineError> {
        let mut last_problem = String::new();
        for attempt in 0..2 {
            let reply = self.call(template, &prompt, attempt, turn)?;
            match parse(&reply) {
                Ok(value) => return Ok(value),
                Err(problem) => last_problem = problem,
            }
        }
        Err(PipelineError::Parse {
            turn: turn.index,
            template,
            message: last_problem,
        })
    }

    fn ask_json(&self, template: TemplateId, prompt: String, turn: &mut Turn) -> Result<SummaryDoc, PipelineError> {
        let schema = &self.config.schema;
        self.with_reask(template, prompt, turn, |reply| {
            let value = extract_json(reply).map_err(|e| e.to_string())?;
            let doc = schema.lift_single_field(value);
            let report = schema.validate(&doc);
            if report.valid {
                Ok(doc)
            } else {
                let first = &report.violations[0];
                Err(format!(
                    "reply violates schema `{}` ({} violation(s), first: {} at {})",
                    schema.name,
                    report.violations.len(),
                    first.reason,
                    first.path
                ))
            }
        })
    }

    fn ask_text(&self, template: TemplateId, prompt: String, turn: &mut Turn) -> Result<String, PipelineError> {
        self.with_reask(template, prompt, turn, |reply| {
            let text = reply.trim();
            if text.is_empty() {
                Err("empty reply".to_string())
            } else {
                Ok(text.to_string())
            }
        })
    }

    fn ask_cok(&self, template: TemplateId, prompt: String, turn: &mut Turn) -> Result<PatchSet, PipelineError> {
        self.with_reask(template, prompt, turn, |reply| {
            parse_cok_response(reply).map_err(|e| e.to_string())
        })
    }
}

fn special_instruction(format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => TemplateId::JsonInstruction.body(),
        OutputFormat::Text => TemplateId::TextInstruction.body(),
    }
}

fn final_summary_at(
    memory: &Snapshot,
    backend: Option<&dyn LlmBackend>,
    config: &RunConfig,
    turn: usize,
) -> Result<Snapshot, PipelineError> {
    match (memory, config.output_format) {
        (Snapshot::Json(_), OutputFormat::Json) | (Snapshot::Text(_), OutputFormat::Text) => Ok(memory.clone()),
        (Snapshot::Text(_), OutputFormat::Json) => Err(PipelineError::Config(
            "text memory cannot be presented as JSON".into(),
        )),
        (Snapshot::Json(doc), OutputFormat::Text) => match backend {
            None => Ok(Snapshot::Text(render_text_summary(doc))),
            Some(backend) => {
                let prompt = render_prompt(TemplateId::FinalText, &bindings([("memory", pretty(doc))]))
                    .expect("final-text binds its one placeholder");
                let mut last = String::new();
                for attempt in 0..2 {
                    let request = LlmRequest::new(TemplateId::FinalText, turn, prompt.clone())
                        .with_temperature(config.temperature).map(|r| r.with_attempt(attempt))
                        .and_then(|r| backend.complete(&r))
                        .map_err(|source| PipelineError::Llm {
                            turn,
                            template: TemplateId::FinalText,
                            source,
                        })?;
                    let text = request.text.trim();
                    if !text.is_empty() {
                        return Ok(Snapshot::Text(text.to_string()));
                    }
                    last = "empty reply".into();
                }
                Err(PipelineError::Parse {
                    turn,
                    template: TemplateId::FinalText,
                    message: last,
                })
            }
        },
    }
}

/// The presentation of a finished memory in `config.output_format`. JSON
/// passes through; text uses the backend when given, else
/// [`render_text_summary`].
pub fn final_summary(
    memory: &Snapshot,
    backend: Option<&dyn LlmBackend>,
    config: &RunConfig,
) -> Result<Snapshot, PipelineError> {
    final_summary_at(memory, backend, config, 0)
}

fn run_as(strategies: &[Strategy], stream: &DocumentStream, backend: &dyn LlmBackend, config: &RunConfig) -> Result<RunResult, RunFailure> {
    if !strategies.contains(&config.strategy) {
        return Err(RunFailure {
            error: PipelineError::Config(format!("strategy {} does not fit this runner", config.strategy)),
            turns: Vec::new(),
        });
    }
    Pipeline::new(backend, config).run(stream)
}

/// GO: one prompt over every document.
pub fn run_generate_once(stream: &DocumentStream, backend: &dyn LlmBackend, config: &RunConfig) -> Result<RunResult, RunFailure> {
    run_as(&[Strategy::GoText, Strategy::GoJson], stream, backend, config)
}

/// GU: generate from the first document, then rewrite the whole summary per
/// document.
pub fn run_generate_update(stream: &DocumentStream, backend: &dyn LlmBackend, config: &RunConfig) -> Result<RunResult, RunFailure> {
    run_as(&[Strategy::GuText, Strategy::GuJson], stream, backend, config)
}

/// GM: summarize each document alone, key-union merge, then model dedup.
pub fn run_generate_merge(stream: &DocumentStream, backend: &dyn LlmBackend, config: &RunConfig) -> Result<RunResult, RunFailure> {
    run_as(&[Strategy::GmJson], stream, backend, config)
}

/// CoK: summarize each document alone, then apply the model's keyed
/// update/add proposals to memory.
pub fn run_chain_of_key(stream: &DocumentStream, backend: &dyn LlmBackend, config: &RunConfig) -> Result<RunResult, RunFailure> {
    run_as(&[Strategy::CokJson], stream, backend, config)
}

/// Runs whichever strategy `config` names.
pub fn run_strategy(stream: &DocumentStream, backend: &dyn LlmBackend, config: &RunConfig) -> Result<RunResult, RunFailure> {
    Pipeline::new(backend, config).run(stream)
}
