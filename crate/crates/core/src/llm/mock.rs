//! A deterministic, rule-based stand-in for a language model.
//!
//! It reads the same prompts a real model would get and answers from a fixed
//! table of facts: every trigger phrase found in the relevant part of the
//! prompt contributes its summary fragment. Used to author the shipped
//! cassettes and in tests that need a backend which "understands" prompts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{extract_json, LlmBackend, LlmError, LlmRequest, LlmResponse, TemplateId};
use crate::doc::{parse_text_summary, render_text_summary, to_compact, SummaryDoc};
use crate::memory::{exact_dedup, programmatic_merge, truncate_to_budget, ByteQuarterTokenizer};
use crate::pathpatch::render_segments;
use crate::schema::{Schema, SchemaError};

/// File form of a [`SyntheticBackend`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// `entity`, `book`, or a schema file path.
    pub schema: String,
    pub facts: Vec<Fact>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub confusing_markers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub trigger: String,
    pub summary: SummaryDoc,
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("fact `{trigger}` does not conform to schema `{schema}`")]
    InvalidFact { trigger: String, schema: String },
}

#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    schema: Schema,
    facts: Vec<(String, SummaryDoc)>,
    confusing_markers: Vec<String>,
}

impl SyntheticBackend {
    /// `facts` pairs a trigger phrase with the schema-shaped fragment it
    /// contributes.
    pub fn new(schema: Schema, facts: Vec<(String, SummaryDoc)>) -> Self {
        SyntheticBackend {
            schema,
            facts,
            confusing_markers: Vec::new(),
        }
    }

    pub fn from_spec(spec: &SyntheticSpec) -> Result<Self, SpecError> {
        let schema = Schema::load(&spec.schema)?;
        let mut facts = Vec::with_capacity(spec.facts.len());
        for fact in &spec.facts {
            let summary = schema.lift_single_field(fact.summary.clone());
            if !schema.validate(&summary).valid {
                return Err(SpecError::InvalidFact {
                    trigger: fact.trigger.clone(),
                    schema: schema.name.clone(),
                });
            }
            facts.push((fact.trigger.clone(), summary));
        }
        Ok(SyntheticBackend::new(schema, facts).with_confusing_markers(spec.confusing_markers.clone()))
    }

    pub fn from_file(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let spec: SyntheticSpec = serde_json::from_str(&text).map_err(|source| SpecError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_spec(&spec)
    }

    /// Sentences containing any of these (case-insensitive) are judged
    /// confusing by the coherence judge.
    pub fn with_confusing_markers(mut self, markers: Vec<String>) -> Self {
        self.confusing_markers = markers.into_iter().map(|m| m.to_lowercase()).collect();
        self
    }

    fn facts_in(&self, region: &str) -> SummaryDoc {
        let mut doc = self.schema.empty_doc();
        for (trigger, fragment) in &self.facts {
            if region.contains(trigger.as_str()) {
                doc = programmatic_merge(&doc, fragment).expect("fact fragments share the schema shape");
            }
        }
        exact_dedup(&doc)
    }

    fn merged(&self, existing: SummaryDoc, region: &str) -> SummaryDoc {
        let existing = self.schema.lift_single_field(existing);
        let merged = programmatic_merge(&existing, &self.facts_in(region)).unwrap_or(existing);
        exact_dedup(&merged)
    }

    fn text_to_doc(&self, text: &str) -> SummaryDoc {
        let mut doc = self.schema.empty_doc();
        let fields: Vec<&String> = self.schema.root_fields().keys().collect();
        let mut section = fields.first().map(|f| f.to_string()).unwrap_or_default();
        for line in text.lines() {
            if let Some(header) = line.strip_prefix("## ") {
                section = header.trim().to_string();
                continue;
            }
            for (key, values) in parse_text_summary(line) {
                if let Some(Value::Object(map)) = doc.get_mut(&section) {
                    let entry = map.entry(key).or_insert_with(|| json!([]));
                    if let Value::Array(items) = entry {
                        items.extend(values.into_iter().map(Value::String));
                    }
                }
            }
        }
        doc
    }

    // Single-field schemas answer in the flat form the prompt examples use.
    fn json_reply(&self, doc: &SummaryDoc) -> String {
        let body = match doc {
            Value::Object(map) if self.schema.root_fields().len() == 1 => {
                map.values().next().cloned().unwrap_or(json!({}))
            }
            other => other.clone(),
        };
        format!("```json\n{}\n```", pretty(&body))
    }

    fn respond(&self, request: &LlmRequest) -> Result<String, LlmError> {
        let prompt = request.prompt.as_str();
        match request.template {
            TemplateId::GenerateEntity => {
                Ok(self.json_reply(&self.facts_in(after_last(prompt, "Your Task:"))))
            }
            TemplateId::GenerateEntityText => {
                Ok(render_text_summary(&self.facts_in(after_last(prompt, "Your Task:"))))
            }
            TemplateId::UpdateEntity => {
                let paragraphs = between(prompt, "New Paragraph:\n", "\n\nGiven Existing Summary Json:")?;
                let existing = parse_json(between(prompt, "Given Existing Summary Json:\n", "\n\nProceed to update")?)?;
                Ok(self.json_reply(&self.merged(existing, paragraphs)))
            }
            TemplateId::UpdateEntityText => {
                let paragraphs = between(prompt, "New Paragraph:\n", "\n\nGiven Existing Summary:")?;
                let existing = self.text_to_doc(between(prompt, "Given Existing Summary:\n", "\n\nProceed to update")?);
                Ok(render_text_summary(&self.merged(existing, paragraphs)))
            }
            TemplateId::Dedup => {
                let existing = parse_json(between(prompt, "Given Existing Summary:\n", "\n\nNew Summary after")?)?;
                Ok(self.json_reply(&exact_dedup(&self.schema.lift_single_field(existing))))
            }
            TemplateId::Cok | TemplateId::CokBook => {
                let new = parse_json(between(prompt, "[NEW SUMMARY]\n", "\n\n[CLASS]")?)?;
                let partial = parse_json(between(prompt, "[PARTIAL SUMMARY]\n", "\n\n[THOUGHTS FOR UPDATE]")?)?;
                Ok(cok_reply(&new, &partial))
            }
            TemplateId::Compress => {
                let budget: usize = between(prompt, "Number of tokens: ", "\n")?
                    .trim()
                    .parse()
                    .map_err(|_| LlmError::BadReply("unreadable token budget".into()))?;
                let memory = between(prompt, "Summary JSON:\n", "\n\nCompressed summary JSON:")?;
                Ok(self.compress(memory, budget))
            }
            TemplateId::GenerateBook | TemplateId::UpdateBook => {
                let segment = between(prompt, "A segment from a story:\n\n---\n\n", "\n\n---")?;
                let as_text = prompt.trim_end().ends_with("in text:");
                let existing = if request.template == TemplateId::UpdateBook {
                    let memory = between(prompt, "up until this point:\n\n---\n\n", "\n\n---\n\nOutput Type:")?;
                    if as_text {
                        self.text_to_doc(memory)
                    } else {
                        parse_json(memory)?
                    }
                } else {
                    self.schema.empty_doc()
                };
                let doc = self.merged(existing, segment);
                Ok(if as_text {
                    render_text_summary(&doc)
                } else {
                    self.json_reply(&doc)
                })
            }
            TemplateId::FinalText => {
                let memory = parse_json(between(prompt, "Summary JSON:\n", "\n\nPlain-text summary:")?)?;
                Ok(render_text_summary(&self.schema.lift_single_field(memory)))
            }
            TemplateId::MatchJudge => {
                let predicted = between(prompt, "Predicted pair:\n", "\n\nReference pairs:")?;
                let candidates = between(prompt, "Reference pairs:\n", "\n\nAnswer with")?;
                let wanted = squash(predicted);
                let hit = candidates.lines().find_map(|line| {
                    let (number, pair) = line.split_once(". ")?;
                    (squash(pair) == wanted).then(|| number.trim().parse::<u64>().ok())?
                });
                Ok(json!({ "match": hit }).to_string())
            }
            TemplateId::CoherenceJudge => {
                let sentence = between(prompt, "Sentence:\n", "\n\nAnswer with")?.to_lowercase();
                let confusing = self.confusing_markers.iter().any(|m| sentence.contains(m.as_str()));
                let dimensions: Vec<&str> = if confusing { vec!["Discontinuity"] } else { vec![] };
                Ok(json!({ "confusing": confusing, "dimensions": dimensions }).to_string())
            }
            TemplateId::JsonInstruction | TemplateId::TextInstruction => Err(LlmError::BadReply(
                format!("`{}` is a prompt fragment, not a request", request.template),
            )),
        }
    }

    fn compress(&self, memory: &str, budget: usize) -> String {
        match extract_json(memory) {
            Ok(doc) => {
                let doc = self.schema.lift_single_field(doc);
                // Keep the first detail of every key, then trim further if needed.
                let shortened = first_values_only(&doc);
                let fitted = truncate_to_budget(&shortened, &self.schema, &ByteQuarterTokenizer, budget)
                    .unwrap_or(shortened);
                to_compact(&fitted)
            }
            Err(_) => {
                let limit = budget.saturating_mul(4);
                let mut cut = memory.len().min(limit);
                while !memory.is_char_boundary(cut) {
                    cut -= 1;
                }
                memory[..cut].trim_end().to_string()
            }
        }
    }
}

impl LlmBackend for SyntheticBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        self.respond(request).map(|text| LlmResponse::new(text, "synthetic"))
    }

    fn name(&self) -> &str {
        "synthetic"
    }
}

fn pretty(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("JSON values serialize")
}

fn squash(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn after_last<'a>(text: &'a str, marker: &str) -> &'a str {
    text.rfind(marker).map_or(text, |i| &text[i + marker.len()..])
}

// Text between the last `start` and the following `end` (or the end of text).
fn between<'a>(text: &'a str, start: &str, end: &str) -> Result<&'a str, LlmError> {
    let from = text
        .rfind(start)
        .ok_or_else(|| LlmError::BadReply(format!("prompt lacks `{}`", start.trim())))?
        + start.len();
    let rest = &text[from..];
    Ok(rest.find(end).map_or(rest, |i| &rest[..i]))
}

fn parse_json(text: &str) -> Result<Value, LlmError> {
    extract_json(text).map_err(|e| LlmError::BadReply(e.to_string()))
}

fn first_values_only(doc: &Value) -> Value {
    match doc {
        Value::Object(map) => Value::Object(map.iter().map(|(k, v)| (k.clone(), first_values_only(v))).collect()),
        Value::Array(items) => Value::Array(items.iter().take(1).cloned().collect()),
        other => other.clone(),
    }
}

fn cok_reply(new: &Value, partial: &Value) -> String {
    let mut updates = Map::new();
    let mut adds = Map::new();
    let mut partial_keys = Vec::new();
    let mut new_keys = Vec::new();
    let mut touched = Vec::new();
    let mut missing = Vec::new();

    let empty = Map::new();
    let new_fields = new.as_object().unwrap_or(&empty);
    for (field, value) in new_fields {
        let Value::Object(entries) = value else { continue };
        let existing = partial.get(field).and_then(Value::as_object);
        for (key, values) in entries {
            new_keys.push(key.clone());
            let path = render_segments(&[field.clone(), key.clone()]);
            match existing.and_then(|m| m.get(key)) {
                Some(Value::Array(current)) => {
                    let fresh: Vec<Value> = values
                        .as_array()
                        .into_iter()
                        .flatten()
                        .filter(|v| !current.contains(v))
                        .cloned()
                        .collect();
                    if !fresh.is_empty() {
                        touched.push(key.clone());
                        updates.insert(path, json!({ "update": fresh }));
                    }
                }
                Some(_) => {}
                None => {
                    missing.push(key.clone());
                    adds.insert(path, json!({ "add": values }));
                }
            }
        }
    }
    if let Some(fields) = partial.as_object() {
        for value in fields.values() {
            if let Some(entries) = value.as_object() {
                partial_keys.extend(entries.keys().cloned());
            }
        }
    }

    let list = |items: &[String]| serde_json::to_string(items).expect("strings serialize");
    let paths = |map: &Map<String, Value>| list(&map.keys().cloned().collect::<Vec<_>>());
    format!(
        "1. I need to figure out which fields and values to update.\n\
         2. [PARTIAL SUMMARY] contains information about the following: {}\n\
         3. [NEW SUMMARY] contains new content relevant to the following existing content: {}\n\
         4. The content should be updated at the following JSONPaths: {}\n\n\
         [UPDATED OBJECTS]\n{}\n\n\
         [THOUGHTS FOR ADD]\n\
         1. I need to figure out which fields and values to add.\n\
         2. [NEW SUMMARY] mentions information about the following: {}\n\
         3. [PARTIAL SUMMARY] does not yet have information about: {}\n\
         4. The content should be added at the following JSONPaths: {}\n\n\
         [ADDED OBJECTS]\n{}\n",
        list(&partial_keys),
        list(&touched),
        paths(&updates),
        pretty(&Value::Object(updates.clone())),
        list(&new_keys),
        list(&missing),
        paths(&adds),
        pretty(&Value::Object(adds.clone())),
    )
}
