//! The evolving structured summary and everything that keeps it in shape:
//! token counting, document chunking, key-union merging, exact dedup, and
//! the token-budget compression loop.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::doc::{to_compact, SummaryDoc};
use crate::llm::{
    bindings, extract_json, render_prompt, LlmBackend, LlmError, LlmRequest, TemplateId,
};
use crate::schema::{Schema, SchemaNode, ValidationReport};

pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// ceiling(utf-8 bytes / 4).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ByteQuarterTokenizer;

impl Tokenizer for ByteQuarterTokenizer {
    fn count(&self, text: &str) -> usize {
        text.len().div_ceil(4)
    }
}

pub fn count_tokens(tokenizer: &dyn Tokenizer, text: &str) -> usize {
    tokenizer.count(text)
}

/// Tokens used by the compact serialization of `doc`.
pub fn doc_tokens(tokenizer: &dyn Tokenizer, doc: &SummaryDoc) -> usize {
    tokenizer.count(&to_compact(doc))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub index: usize,
    pub text: String,
    pub token_count: usize,
}

/// Greedy segmentation: each chunk ends at the furthest whitespace boundary
/// that keeps it within `limit` tokens. A whitespace-free run longer than the
/// limit is split at a character boundary.
///
/// Panics if `limit` is zero.
pub fn chunk_document(tokenizer: &dyn Tokenizer, text: &str, limit: usize) -> Vec<Chunk> {
    assert!(limit >= 1, "chunk limit must be at least 1");
    let boundaries: Vec<usize> = text
        .char_indices()
        .filter(|(_, c)| c.is_whitespace())
        .map(|(i, c)| i + c.len_utf8())
        .collect();
    let fits = |start: usize, end: usize| tokenizer.count(&text[start..end]) <= limit;

    let mut chunks = Vec::new();
    let mut start = 0;
    while start < text.len() {
        let end = if fits(start, text.len()) {
            text.len()
        } else {
            let first = boundaries.partition_point(|&b| b <= start);
            let candidates = &boundaries[first..];
            let fitting = candidates.partition_point(|&b| fits(start, b));
            if fitting > 0 {
                candidates[fitting - 1]
            } else {
                // The cut lies inside the run before the next boundary.
                let run_end = candidates.first().copied().unwrap_or(text.len());
                hard_split(text, start, run_end, &fits)
            }
        };
        chunks.push(Chunk {
            index: chunks.len(),
            text: text[start..end].to_string(),
            token_count: tokenizer.count(&text[start..end]),
        });
        start = end;
    }
    chunks
}

fn hard_split(text: &str, start: usize, run_end: usize, fits: &dyn Fn(usize, usize) -> bool) -> usize {
    let ends: Vec<usize> = text[start..run_end]
        .char_indices()
        .map(|(i, c)| start + i + c.len_utf8())
        .collect();
    let fitting = ends.partition_point(|&e| fits(start, e));
    // A single character over the limit still has to go somewhere.
    ends[fitting.saturating_sub(1)]
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MergeError {
    #[error("cannot merge differently shaped values at {0}")]
    ShapeMismatch(String),
}

/// Key-union merge: maps take the union of keys, lists concatenate with
/// `a`'s values first, duplicates are kept. String leaves keep `a`'s value.
pub fn programmatic_merge(a: &SummaryDoc, b: &SummaryDoc) -> Result<SummaryDoc, MergeError> {
    let mut path = Vec::new();
    merge_values(a, b, &mut path)
}

fn merge_values(a: &Value, b: &Value, path: &mut Vec<String>) -> Result<Value, MergeError> {
    match (a, b) {
        (Value::Object(left), Value::Object(right)) => {
            let mut out = left.clone();
            for (key, value) in right {
                path.push(key.clone());
                let merged = match left.get(key) {
                    Some(existing) => merge_values(existing, value, path)?,
                    None => value.clone(),
                };
                path.pop();
                out.insert(key.clone(), merged);
            }
            Ok(Value::Object(out))
        }
        (Value::Array(left), Value::Array(right)) => {
            Ok(Value::Array(left.iter().chain(right).cloned().collect()))
        }
        (Value::String(_), Value::String(_)) => Ok(a.clone()),
        _ => Err(MergeError::ShapeMismatch(crate::pathpatch::render_segments(path))),
    }
}

/// Collapses verbatim-equal list elements to their first occurrence.
pub fn exact_dedup(doc: &SummaryDoc) -> SummaryDoc {
    match doc {
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| (k.clone(), exact_dedup(v)))
                .collect(),
        ),
        Value::Array(items) => {
            let mut seen: Vec<&Value> = Vec::with_capacity(items.len());
            for item in items {
                if !seen.contains(&item) {
                    seen.push(item);
                }
            }
            Value::Array(seen.into_iter().map(exact_dedup).collect())
        }
        other => other.clone(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("document does not conform to schema `{schema}`: {violations} violation(s)")]
    Invalid { schema: String, violations: usize, report: ValidationReport },
}

/// The summary state `S_t`; `turn` is the index of the latest document folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMemory {
    doc: SummaryDoc,
    schema: Schema,
    turn: usize,
    token_budget: Option<usize>,
}

impl StructuredMemory {
    pub fn new(schema: Schema) -> Self {
        StructuredMemory {
            doc: schema.empty_doc(),
            schema,
            turn: 0,
            token_budget: None,
        }
    }

    pub fn with_budget(mut self, budget: Option<usize>) -> Self {
        self.token_budget = budget;
        self
    }

    pub fn from_doc(schema: Schema, doc: SummaryDoc) -> Result<Self, MemoryError> {
        let mut memory = StructuredMemory::new(schema);
        memory.replace(doc)?;
        Ok(memory)
    }

    pub fn doc(&self) -> &SummaryDoc {
        &self.doc
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn turn(&self) -> usize {
        self.turn
    }

    pub fn token_budget(&self) -> Option<usize> {
        self.token_budget
    }

    /// Swaps in a new document if it validates.
    pub fn replace(&mut self, doc: SummaryDoc) -> Result<(), MemoryError> {
        let report = self.schema.validate(&doc);
        if !report.valid {
            return Err(MemoryError::Invalid {
                schema: self.schema.name.clone(),
                violations: report.violations.len(),
                report,
            });
        }
        self.doc = doc;
        Ok(())
    }

    /// Moves to the next turn index.
    pub fn advance(&mut self) {
        self.turn += 1;
    }

    pub fn tokens(&self, tokenizer: &dyn Tokenizer) -> usize {
        doc_tokens(tokenizer, &self.doc)
    }

    pub fn into_doc(self) -> SummaryDoc {
        self.doc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    TruncateValues,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressionPolicy {
    pub budget: usize,
    pub max_retries: u32,
    pub fallback: Fallback,
}

impl CompressionPolicy {
    /// Panics if `budget` is zero.
    pub fn new(budget: usize) -> Self {
        assert!(budget > 0, "token budget must be positive");
        CompressionPolicy {
            budget,
            max_retries: 3,
            fallback: Fallback::TruncateValues,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompressionSource {
    Unchanged,
    Model,
    Truncation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub source: CompressionSource,
    pub calls: u32,
    pub tokens_before: usize,
    pub tokens_after: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum BudgetError {
    #[error("budget of {budget} tokens cannot be met (smallest reachable: {reachable})")]
    Unreachable { budget: usize, reachable: usize },
    #[error("compression call failed: {0}")]
    Llm(#[from] LlmError),
}

/// Keeps the memory within `policy.budget` tokens: first by asking the model
/// to compress, then (when allowed) by dropping values from the tail of the
/// longest lists.
pub fn enforce_budget(
    memory: &StructuredMemory,
    backend: &dyn LlmBackend,
    tokenizer: &dyn Tokenizer,
    policy: &CompressionPolicy,
    temperature: f64,
) -> Result<(StructuredMemory, CompressionReport), BudgetError> {
    let tokens_before = memory.tokens(tokenizer);
    if tokens_before <= policy.budget {
        return Ok((
            memory.clone(),
            CompressionReport {
                source: CompressionSource::Unchanged,
                calls: 0,
                tokens_before,
                tokens_after: tokens_before,
            },
        ));
    }

    let prompt = render_prompt(
        TemplateId::Compress,
        &bindings([
            ("token_budget", policy.budget.to_string()),
            ("memory", to_compact(memory.doc())),
        ]),
    )
    .expect("compress bindings are complete");

    let mut calls = 0;
    for attempt in 0..policy.max_retries {
        let request = LlmRequest::new(TemplateId::Compress, memory.turn(), prompt.clone())
            .with_temperature(temperature)?
            .with_attempt(attempt);
        let reply = backend.complete(&request)?;
        calls += 1;
        let Ok(value) = extract_json(&reply.text) else {
            continue;
        };
        let candidate = memory.schema().lift_single_field(value);
        let mut next = memory.clone();
        if next.replace(candidate).is_ok() && next.tokens(tokenizer) <= policy.budget {
            let tokens_after = next.tokens(tokenizer);
            return Ok((
                next,
                CompressionReport {
                    source: CompressionSource::Model,
                    calls,
                    tokens_before,
                    tokens_after,
                },
            ));
        }
    }

    match policy.fallback {
        Fallback::Fail => Err(BudgetError::Unreachable {
            budget: policy.budget,
            reachable: tokens_before,
        }),
        Fallback::TruncateValues => {
            let doc =
                truncate_to_budget(memory.doc(), memory.schema(), tokenizer, policy.budget)?;
            let mut next = memory.clone();
            next.replace(doc)
                .expect("truncation only removes list elements and map entries");
            let tokens_after = next.tokens(tokenizer);
            Ok((
                next,
                CompressionReport {
                    source: CompressionSource::Truncation,
                    calls,
                    tokens_before,
                    tokens_after,
                },
            ))
        }
    }
}

/// Drops list tails (longest list first, earliest in document order on
/// ties), then map entries from the end, until the compact form fits.
pub fn truncate_to_budget(
    doc: &SummaryDoc,
    schema: &Schema,
    tokenizer: &dyn Tokenizer,
    budget: usize,
) -> Result<SummaryDoc, BudgetError> {
    let mut doc = doc.clone();
    loop {
        let tokens = doc_tokens(tokenizer, &doc);
        if tokens <= budget {
            return Ok(doc);
        }
        if pop_longest_list(&mut doc) {
            continue;
        }
        if pop_last_map_entry(&schema.root, &mut doc) {
            continue;
        }
        return Err(BudgetError::Unreachable {
            budget,
            reachable: tokens,
        });
    }
}

fn pop_longest_list(doc: &mut Value) -> bool {
    fn find<'a>(value: &'a mut Value, best: &mut Option<&'a mut Vec<Value>>) {
        match value {
            Value::Array(items) => {
                if !items.is_empty() && best.as_ref().is_none_or(|b| items.len() > b.len()) {
                    *best = Some(items);
                }
            }
            Value::Object(map) => {
                for child in map.values_mut() {
                    find(child, best);
                }
            }
            _ => {}
        }
    }
    let mut best = None;
    find(doc, &mut best);
    match best {
        Some(items) => {
            items.pop();
            true
        }
        None => false,
    }
}

// Map entries are removable, object fields are not.
fn pop_last_map_entry(node: &SchemaNode, value: &mut Value) -> bool {
    let Value::Object(map) = value else {
        return false;
    };
    match node {
        SchemaNode::Object { fields } => fields.iter().rev().any(|(name, child)| {
            map.get_mut(name)
                .is_some_and(|v| pop_last_map_entry(child, v))
        }),
        SchemaNode::Map { value_type } => {
            let deeper = map
                .values_mut()
                .rev()
                .any(|v| pop_last_map_entry(value_type, v));
            if deeper {
                return true;
            }
            match map.keys().next_back().cloned() {
                Some(last) => map.shift_remove(&last).is_some(),
                None => false,
            }
        }
        _ => false,
    }
}

/// Text-memory variant of [`enforce_budget`]. Falls back to the first
/// in-budget whitespace-bounded prefix.
pub fn enforce_text_budget(
    text: &str,
    turn: usize,
    backend: &dyn LlmBackend,
    tokenizer: &dyn Tokenizer,
    policy: &CompressionPolicy,
    temperature: f64,
) -> Result<(String, CompressionReport), BudgetError> {
    let tokens_before = tokenizer.count(text);
    let report = |source, calls, tokens_after| CompressionReport {
        source,
        calls,
        tokens_before,
        tokens_after,
    };
    if tokens_before <= policy.budget {
        return Ok((text.to_string(), report(CompressionSource::Unchanged, 0, tokens_before)));
    }
    let prompt = render_prompt(
        TemplateId::Compress,
        &bindings([
            ("token_budget", policy.budget.to_string()),
            ("memory", text.to_string()),
        ]),
    )
    .expect("compress bindings are complete");
    let mut calls = 0;
    for attempt in 0..policy.max_retries {
        let request = LlmRequest::new(TemplateId::Compress, turn, prompt.clone())
            .with_temperature(temperature)?
            .with_attempt(attempt);
        let reply = backend.complete(&request)?;
        calls += 1;
        let candidate = reply.text.trim();
        let tokens = tokenizer.count(candidate);
        if !candidate.is_empty() && tokens <= policy.budget {
            return Ok((candidate.to_string(), report(CompressionSource::Model, calls, tokens)));
        }
    }
    match policy.fallback {
        Fallback::Fail => Err(BudgetError::Unreachable {
            budget: policy.budget,
            reachable: tokens_before,
        }),
        Fallback::TruncateValues => {
            let head = chunk_document(tokenizer, text, policy.budget)
                .into_iter()
                .next()
                .map(|c| c.text.trim_end().to_string())
                .unwrap_or_default();
            let tokens = tokenizer.count(&head);
            Ok((head, report(CompressionSource::Truncation, calls, tokens)))
        }
    }
}

/// Empty map-of-lists summary used as the merge identity in tests and
/// pipelines.
pub fn empty_like(doc: &SummaryDoc) -> SummaryDoc {
    match doc {
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| (k.clone(), if v.is_object() { Value::Object(Map::new()) } else { empty_like(v) }))
                .collect(),
        ),
        Value::Array(_) => Value::Array(Vec::new()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::FnBackend;
    use crate::schema::{book_schema, entity_schema};
    use serde_json::json;
    use std::sync::atomic::{AtomicU32, Ordering};

    #[test]
    fn default_tokenizer_counts() {
        let t = ByteQuarterTokenizer;
        assert_eq!(count_tokens(&t, ""), 0);
        assert_eq!(count_tokens(&t, "abcd"), 1);
        assert_eq!(count_tokens(&t, "abcdefghi"), 3);
        assert_eq!(count_tokens(&t, "é"), 1);
    }

    #[test]
    fn chunking_basic_cases() {
        let t = ByteQuarterTokenizer;
        assert!(chunk_document(&t, "", 2000).is_empty());
        let short = "ten tokens of text here, more or less!!";
        let chunks = chunk_document(&t, short, 2000);
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, short);

        // 4500 tokens: 2250 words of "abcdefg " (8 bytes = 2 tokens).
        let text = "abcdefg ".repeat(2250);
        assert_eq!(t.count(&text), 4500);
        let chunks = chunk_document(&t, &text, 2000);
        let sizes: Vec<usize> = chunks.iter().map(|c| c.token_count).collect();
        assert_eq!(sizes, [2000, 2000, 500]);
        assert_eq!(chunks.iter().map(|c| c.text.as_str()).collect::<String>(), text);
    }

    #[test]
    fn chunking_prefers_whitespace_and_splits_long_runs() {
        let t = ByteQuarterTokenizer;
        let chunks = chunk_document(&t, "aaaa bbbb cccc", 2);
        assert_eq!(
            chunks.iter().map(|c| c.text.as_str()).collect::<Vec<_>>(),
            ["aaaa ", "bbbb ", "cccc"]
        );
        let chunks = chunk_document(&t, &"x".repeat(20), 2);
        assert_eq!(chunks.len(), 3);
        assert!(chunks.iter().all(|c| c.token_count <= 2));

        // A long run cut in the middle, then ordinary words after it.
        let text = format!("{} tail words here", "y".repeat(11));
        let chunks = chunk_document(&t, &text, 2);
        assert_eq!(
            chunks.iter().map(|c| c.text.as_str()).collect::<Vec<_>>(),
            ["yyyyyyyy", "yyy ", "tail ", "words ", "here"]
        );
    }

    #[test]
    fn merge_examples() {
        let a = json!({"attributes": {"A": ["x"]}});
        let b = json!({"attributes": {"A": ["y"], "B": ["z"]}});
        assert_eq!(
            programmatic_merge(&a, &b).unwrap(),
            json!({"attributes": {"A": ["x", "y"], "B": ["z"]}})
        );
        assert_eq!(programmatic_merge(&a, &json!({"attributes": {}})).unwrap(), a);
        assert_eq!(
            programmatic_merge(&a, &a).unwrap(),
            json!({"attributes": {"A": ["x", "x"]}})
        );
        assert!(matches!(
            programmatic_merge(&a, &json!({"attributes": {"A": "x"}})),
            Err(MergeError::ShapeMismatch(p)) if p == "$.'attributes'.'A'"
        ));
    }

    #[test]
    fn dedup_examples() {
        assert_eq!(
            exact_dedup(&json!({"attributes": {"A": ["x", "x", "y"]}})),
            json!({"attributes": {"A": ["x", "y"]}})
        );
        let clean = json!({"attributes": {"A": ["x"], "B": ["y"]}});
        assert_eq!(exact_dedup(&clean), clean);
        let near = json!({"attributes": {"Views": ["v"], "views from hotel": ["v"]}});
        assert_eq!(exact_dedup(&near), near);
    }

    #[test]
    fn memory_rejects_invalid_docs() {
        let mut memory = StructuredMemory::new(entity_schema());
        assert_eq!(memory.doc(), &json!({"attributes": {}}));
        assert!(memory.replace(json!({"attributes": {"A": "x"}})).is_err());
        assert!(memory.replace(json!({"attributes": {"A": ["x"]}})).is_ok());
        memory.advance();
        assert_eq!(memory.turn(), 1);
    }

    fn doc_with_tokens(target: usize) -> SummaryDoc {
        let mut attrs = Map::new();
        let mut i = 0;
        loop {
            let doc = json!({ "attributes": attrs.clone() });
            if doc_tokens(&ByteQuarterTokenizer, &doc) >= target {
                return doc;
            }
            attrs.insert(format!("Attr{i}"), json!([format!("value number {i}"), "shared detail"]));
            i += 1;
        }
    }

    fn compressing_backend(reply: String) -> (FnBackend<impl Fn(&LlmRequest) -> Result<String, LlmError>>, std::sync::Arc<AtomicU32>) {
        let calls = std::sync::Arc::new(AtomicU32::new(0));
        let counter = calls.clone();
        let backend = FnBackend::new("fixed", move |req: &LlmRequest| {
            assert_eq!(req.template, TemplateId::Compress);
            counter.fetch_add(1, Ordering::SeqCst);
            Ok(reply.clone())
        });
        (backend, calls)
    }

    #[test]
    fn under_budget_is_unchanged() {
        let doc = doc_with_tokens(150);
        let memory = StructuredMemory::from_doc(entity_schema(), doc).unwrap();
        assert!(memory.tokens(&ByteQuarterTokenizer) <= 200);
        let (backend, calls) = compressing_backend("{}".into());
        let (out, report) =
            enforce_budget(&memory, &backend, &ByteQuarterTokenizer, &CompressionPolicy::new(200), 0.8).unwrap();
        assert_eq!(out, memory);
        assert_eq!(report.source, CompressionSource::Unchanged);
        assert_eq!(calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn accepts_fitting_model_reply() {
        let memory = StructuredMemory::from_doc(entity_schema(), doc_with_tokens(604)).unwrap();
        let compressed = doc_with_tokens(120);
        let tokens = doc_tokens(&ByteQuarterTokenizer, &compressed);
        assert!((120..130).contains(&tokens));
        let (backend, calls) = compressing_backend(format!("Sure:\n{}", to_compact(&compressed)));
        let (out, report) =
            enforce_budget(&memory, &backend, &ByteQuarterTokenizer, &CompressionPolicy::new(200), 0.8).unwrap();
        assert_eq!(out.doc(), &compressed);
        assert_eq!(report.source, CompressionSource::Model);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn falls_back_after_oversize_replies() {
        let memory = StructuredMemory::from_doc(entity_schema(), doc_with_tokens(604)).unwrap();
        let (backend, calls) = compressing_backend(to_compact(&doc_with_tokens(250)));
        let (out, report) =
            enforce_budget(&memory, &backend, &ByteQuarterTokenizer, &CompressionPolicy::new(200), 0.8).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        assert_eq!(report.source, CompressionSource::Truncation);
        assert!(out.tokens(&ByteQuarterTokenizer) <= 200);
        assert!(entity_schema().validate(out.doc()).valid);
        let expected = truncate_to_budget(memory.doc(), &entity_schema(), &ByteQuarterTokenizer, 200).unwrap();
        assert_eq!(out.doc(), &expected);
    }

    #[test]
    fn fail_policy_reports_unreachable() {
        let memory = StructuredMemory::from_doc(entity_schema(), doc_with_tokens(604)).unwrap();
        let (backend, _) = compressing_backend("not json".into());
        let policy = CompressionPolicy {
            fallback: Fallback::Fail,
            ..CompressionPolicy::new(200)
        };
        assert!(matches!(
            enforce_budget(&memory, &backend, &ByteQuarterTokenizer, &policy, 0.8),
            Err(BudgetError::Unreachable { budget: 200, .. })
        ));
    }

    #[test]
    fn truncation_drops_from_longest_list_tail() {
        let doc = json!({"attributes": {"A": ["a1", "a2", "a3"], "B": ["b1"]}});
        let full = doc_tokens(&ByteQuarterTokenizer, &doc);
        // One element shorter in bytes: `,"a3"` is 5 bytes.
        let out = truncate_to_budget(&doc, &entity_schema(), &ByteQuarterTokenizer, full - 1).unwrap();
        assert_eq!(out, json!({"attributes": {"A": ["a1", "a2"], "B": ["b1"]}}));
    }

    #[test]
    fn truncation_reaches_empty_schema_doc() {
        let schema = book_schema();
        let mut doc = schema.empty_doc();
        doc["characters"]["Ann"] = json!(["a nurse", "brave"]);
        doc["events"]["War"] = json!(["begins"]);
        let floor = doc_tokens(&ByteQuarterTokenizer, &schema.empty_doc());
        let out = truncate_to_budget(&doc, &schema, &ByteQuarterTokenizer, floor).unwrap();
        assert_eq!(out, schema.empty_doc());
        assert!(matches!(
            truncate_to_budget(&doc, &schema, &ByteQuarterTokenizer, floor - 1),
            Err(BudgetError::Unreachable { .. })
        ));
    }

    #[test]
    fn text_budget_fallback() {
        let text = "word ".repeat(400);
        let (backend, _) = compressing_backend("still far too long ".repeat(100));
        let (out, report) =
            enforce_text_budget(&text, 3, &backend, &ByteQuarterTokenizer, &CompressionPolicy::new(200), 0.8).unwrap();
        assert_eq!(report.source, CompressionSource::Truncation);
        assert!(ByteQuarterTokenizer.count(&out) <= 200);
        assert!(text.starts_with(&out));
    }
}
