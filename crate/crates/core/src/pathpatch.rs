//! Dotted key paths and the Update/Add patch operations applied to summaries.
//!
//! Only dotted key access is supported: `$` followed by `.key` or `.'quoted
//! key'` segments. Indices, wildcards, and recursive descent are rejected at
//! parse time.

use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::doc::SummaryDoc;
use crate::schema::{Schema, SchemaNode, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JsonPath {
    segments: Vec<String>,
}

impl JsonPath {
    /// Builds a path from raw segments. Returns `None` when the list is empty
    /// or any segment is empty.
    pub fn from_segments<I, S>(segments: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let segments: Vec<String> = segments.into_iter().map(Into::into).collect();
        if segments.is_empty() || segments.iter().any(String::is_empty) {
            return None;
        }
        Some(JsonPath { segments })
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn last(&self) -> &str {
        self.segments.last().expect("paths are non-empty")
    }

    pub fn parent_segments(&self) -> &[String] {
        &self.segments[..self.segments.len() - 1]
    }

    pub fn child(&self, segment: impl Into<String>) -> JsonPath {
        let mut segments = self.segments.clone();
        segments.push(segment.into());
        JsonPath { segments }
    }

    pub fn render(&self) -> String {
        render_segments(&self.segments)
    }
}

impl fmt::Display for JsonPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::str::FromStr for JsonPath {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_path(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathErrorKind {
    MissingRoot,
    EmptyPath,
    EmptySegment,
    UnterminatedQuote,
    TrailingDot,
    InvalidEscape,
    /// Index, slice, wildcard, or filter syntax.
    Unsupported(char),
    UnexpectedChar(char),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("path parse error at position {position}: {kind}")]
pub struct PathError {
    /// Character offset into the input.
    pub position: usize,
    pub kind: PathErrorKind,
}

impl fmt::Display for PathErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathErrorKind::MissingRoot => write!(f, "path must start with `$`"),
            PathErrorKind::EmptyPath => write!(f, "path has no segments"),
            PathErrorKind::EmptySegment => write!(f, "empty segment"),
            PathErrorKind::UnterminatedQuote => write!(f, "unterminated quoted segment"),
            PathErrorKind::TrailingDot => write!(f, "trailing dot"),
            PathErrorKind::InvalidEscape => write!(f, "invalid escape in quoted segment"),
            PathErrorKind::Unsupported(c) => write!(f, "unsupported path syntax `{c}`"),
            PathErrorKind::UnexpectedChar(c) => write!(f, "unexpected character `{c}`"),
        }
    }
}

fn is_bare_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '&'
}

fn syntax_error(position: usize, c: char) -> PathError {
    let kind = match c {
        '[' | ']' | '*' | '?' | '@' | '(' => PathErrorKind::Unsupported(c),
        _ => PathErrorKind::UnexpectedChar(c),
    };
    PathError { position, kind }
}

pub fn parse_path(text: &str) -> Result<JsonPath, PathError> {
    let chars: Vec<char> = text.chars().collect();
    let err = |position, kind| Err(PathError { position, kind });
    if chars.first() != Some(&'$') {
        return err(0, PathErrorKind::MissingRoot);
    }
    let mut pos = 1;
    let mut segments = Vec::new();
    while pos < chars.len() {
        if chars[pos] != '.' {
            return Err(syntax_error(pos, chars[pos]));
        }
        let dot = pos;
        pos += 1;
        match chars.get(pos) {
            None => return err(dot, PathErrorKind::TrailingDot),
            Some('.') => return err(pos, PathErrorKind::EmptySegment),
            Some('\'') => {
                let open = pos;
                pos += 1;
                let mut segment = String::new();
                loop {
                    match chars.get(pos) {
                        None => return err(open, PathErrorKind::UnterminatedQuote),
                        Some('\'') => {
                            pos += 1;
                            break;
                        }
                        Some('\\') => match chars.get(pos + 1) {
                            Some(&c @ ('\'' | '\\')) => {
                                segment.push(c);
                                pos += 2;
                            }
                            None => return err(open, PathErrorKind::UnterminatedQuote),
                            Some(_) => return err(pos, PathErrorKind::InvalidEscape),
                        },
                        Some(&c) => {
                            segment.push(c);
                            pos += 1;
                        }
                    }
                }
                if segment.is_empty() {
                    return err(open, PathErrorKind::EmptySegment);
                }
                segments.push(segment);
            }
            Some(&c) if is_bare_char(c) => {
                let start = pos;
                while pos < chars.len() && is_bare_char(chars[pos]) {
                    pos += 1;
                }
                segments.push(chars[start..pos].iter().collect());
            }
            Some(&c) => return Err(syntax_error(pos, c)),
        }
    }
    if segments.is_empty() {
        return err(1, PathErrorKind::EmptyPath);
    }
    Ok(JsonPath { segments })
}

/// Canonical single-quoted form, `$` for an empty segment list.
pub fn render_segments(segments: &[String]) -> String {
    let mut out = String::from("$");
    for segment in segments {
        out.push_str(".'");
        for c in segment.chars() {
            if c == '\'' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('\'');
    }
    out
}

pub fn render_path(path: &JsonPath) -> String {
    path.render()
}

pub fn resolve<'a>(doc: &'a SummaryDoc, path: &JsonPath) -> Option<&'a Value> {
    resolve_segments(doc, path.segments())
}

fn resolve_segments<'a>(doc: &'a Value, segments: &[String]) -> Option<&'a Value> {
    segments
        .iter()
        .try_fold(doc, |node, segment| node.as_object()?.get(segment))
}

fn resolve_segments_mut<'a>(doc: &'a mut Value, segments: &[String]) -> Option<&'a mut Value> {
    segments
        .iter()
        .try_fold(doc, |node, segment| node.as_object_mut()?.get_mut(segment))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatchError {
    #[error("no value at {0}")]
    PathNotFound(String),
    #[error("parent of {0} does not exist")]
    ParentNotFound(String),
    #[error("{0} already exists")]
    KeyAlreadyExists(String),
    #[error("value for {path} does not match schema node `{expected}`")]
    TypeMismatch { path: String, expected: &'static str },
    #[error("{0} is not a legal path under the schema")]
    SchemaViolation(String),
}

fn check_against(schema: &Schema, path: &JsonPath, value: &Value) -> Result<(), PatchError> {
    let node = schema
        .node_at(path)
        .ok_or_else(|| PatchError::SchemaViolation(path.render()))?;
    if !conforms(node, value) {
        return Err(PatchError::TypeMismatch {
            path: path.render(),
            expected: node.kind_name(),
        });
    }
    Ok(())
}

// Nested object fields may be left unset.
fn conforms(node: &SchemaNode, value: &Value) -> bool {
    match (node, value) {
        (SchemaNode::String, Value::String(_)) => true,
        (SchemaNode::List { element_type }, Value::Array(items)) => {
            items.iter().all(|item| conforms(element_type, item))
        }
        (SchemaNode::Map { value_type }, Value::Object(map)) => map
            .iter()
            .all(|(k, v)| !k.is_empty() && conforms(value_type, v)),
        (SchemaNode::Object { fields }, Value::Object(map)) => map
            .iter()
            .all(|(k, v)| fields.get(k).is_some_and(|node| conforms(node, v))),
        _ => false,
    }
}

// Lists gain the new elements not already present, objects gain missing keys
// and merge shared ones, strings are replaced.
fn merge_into(target: &mut Value, incoming: &Value) -> bool {
    match (target, incoming) {
        (Value::Array(existing), Value::Array(new_items)) => {
            for item in new_items {
                if !existing.contains(item) {
                    existing.push(item.clone());
                }
            }
            true
        }
        (Value::Object(existing), Value::Object(new_map)) => {
            for (key, value) in new_map {
                match existing.get_mut(key) {
                    Some(slot) => {
                        if !merge_into(slot, value) {
                            return false;
                        }
                    }
                    None => {
                        existing.insert(key.clone(), value.clone());
                    }
                }
            }
            true
        }
        (slot @ Value::String(_), Value::String(s)) => {
            *slot = Value::String(s.clone());
            true
        }
        _ => false,
    }
}

/// Integrates `value` into the existing entry at `path`.
pub fn apply_update(
    doc: &SummaryDoc,
    path: &JsonPath,
    value: &Value,
    schema: &Schema,
) -> Result<SummaryDoc, PatchError> {
    if resolve(doc, path).is_none() {
        return Err(PatchError::PathNotFound(path.render()));
    }
    check_against(schema, path, value)?;
    let mut out = doc.clone();
    let target = resolve_segments_mut(&mut out, path.segments()).expect("resolved above");
    if !merge_into(target, value) {
        return Err(PatchError::TypeMismatch {
            path: path.render(),
            expected: schema.node_at(path).map_or("unknown", SchemaNode::kind_name),
        });
    }
    Ok(out)
}

/// Inserts a new key at `path`. The parent must exist and the key must not.
pub fn apply_add(
    doc: &SummaryDoc,
    path: &JsonPath,
    value: &Value,
    schema: &Schema,
) -> Result<SummaryDoc, PatchError> {
    if schema.node_at(path).is_none() {
        return Err(PatchError::SchemaViolation(path.render()));
    }
    if resolve(doc, path).is_some() {
        return Err(PatchError::KeyAlreadyExists(path.render()));
    }
    let parent = resolve_segments(doc, path.parent_segments());
    if !parent.is_some_and(Value::is_object) {
        return Err(PatchError::ParentNotFound(path.render()));
    }
    check_against(schema, path, value)?;
    let mut out = doc.clone();
    resolve_segments_mut(&mut out, path.parent_segments())
        .and_then(Value::as_object_mut)
        .expect("parent checked above")
        .insert(path.last().to_string(), value.clone());
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchKind {
    Update,
    Add,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    PathNotFound,
    KeyAlreadyExistsConvertedToUpdate,
    TypeMismatch,
    UnparseablePath,
    SchemaViolation,
    /// Entry had neither an `update` nor an `add` member.
    MalformedEntry,
    /// The same path was also proposed as an update; the update wins.
    ConflictsWithUpdate,
}

impl From<&PatchError> for SkipReason {
    fn from(err: &PatchError) -> Self {
        match err {
            PatchError::PathNotFound(_) | PatchError::ParentNotFound(_) => SkipReason::PathNotFound,
            PatchError::KeyAlreadyExists(_) => SkipReason::KeyAlreadyExistsConvertedToUpdate,
            PatchError::TypeMismatch { .. } => SkipReason::TypeMismatch,
            PatchError::SchemaViolation(_) => SkipReason::SchemaViolation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposedUpdate {
    pub update: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposedAdd {
    pub add: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedEntry {
    pub path: String,
    pub kind: PatchKind,
    pub reason: SkipReason,
}

/// Update and Add proposals keyed by the path text the model emitted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatchSet {
    updates: IndexMap<String, (JsonPath, ProposedUpdate)>,
    adds: IndexMap<String, (JsonPath, ProposedAdd)>,
    rejected: Vec<RejectedEntry>,
}

impl PatchSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_update(&mut self, path_text: impl Into<String>, value: Value) {
        let path_text = path_text.into();
        match parse_path(&path_text) {
            Ok(path) => {
                self.updates
                    .insert(path_text, (path, ProposedUpdate { update: value }));
            }
            Err(_) => self.reject(path_text, PatchKind::Update, SkipReason::UnparseablePath),
        }
    }

    pub fn push_add(&mut self, path_text: impl Into<String>, value: Value) {
        let path_text = path_text.into();
        match parse_path(&path_text) {
            Ok(path) => {
                self.adds.insert(path_text, (path, ProposedAdd { add: value }));
            }
            Err(_) => self.reject(path_text, PatchKind::Add, SkipReason::UnparseablePath),
        }
    }

    pub fn reject(&mut self, path_text: impl Into<String>, kind: PatchKind, reason: SkipReason) {
        self.rejected.push(RejectedEntry {
            path: path_text.into(),
            kind,
            reason,
        });
    }

    pub fn updates(&self) -> impl Iterator<Item = (&str, &JsonPath, &Value)> {
        self.updates
            .iter()
            .map(|(text, (path, p))| (text.as_str(), path, &p.update))
    }

    pub fn adds(&self) -> impl Iterator<Item = (&str, &JsonPath, &Value)> {
        self.adds
            .iter()
            .map(|(text, (path, p))| (text.as_str(), path, &p.add))
    }

    pub fn rejected(&self) -> &[RejectedEntry] {
        &self.rejected
    }

    pub fn update_count(&self) -> usize {
        self.updates.len()
    }

    pub fn add_count(&self) -> usize {
        self.adds.len()
    }

    /// Number of entries, including rejected ones.
    pub fn len(&self) -> usize {
        self.updates.len() + self.adds.len() + self.rejected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reads one wire object (`{path: {"update": v}}` / `{path: {"add": v}}`).
    /// `section` is the kind recorded for entries that carry neither member.
    pub fn extend_from_wire(&mut self, wire: &Map<String, Value>, section: PatchKind) {
        for (path_text, entry) in wire {
            let entry = entry.as_object();
            let update = entry.and_then(|e| e.get("update"));
            let add = entry.and_then(|e| e.get("add"));
            if update.is_none() && add.is_none() {
                self.reject(path_text.clone(), section, SkipReason::MalformedEntry);
                continue;
            }
            if let Some(v) = update {
                self.push_update(path_text.clone(), v.clone());
            }
            if let Some(v) = add {
                self.push_add(path_text.clone(), v.clone());
            }
        }
    }

    pub fn from_wire(wire: &Map<String, Value>) -> Self {
        let mut set = PatchSet::new();
        set.extend_from_wire(wire, PatchKind::Update);
        set
    }

    pub fn updates_wire(&self) -> Map<String, Value> {
        self.updates
            .iter()
            .map(|(text, (_, p))| (text.clone(), serde_json::json!({ "update": p.update })))
            .collect()
    }

    pub fn adds_wire(&self) -> Map<String, Value> {
        self.adds
            .iter()
            .map(|(text, (_, p))| (text.clone(), serde_json::json!({ "add": p.add })))
            .collect()
    }

    /// Single wire object holding both kinds. A path proposed as both gets
    /// one entry carrying both members.
    pub fn to_wire(&self) -> Map<String, Value> {
        let mut out = self.updates_wire();
        for (text, value) in self.adds_wire() {
            match out.get_mut(&text).and_then(Value::as_object_mut) {
                Some(existing) => {
                    existing.insert("add".into(), value["add"].clone());
                }
                None => {
                    out.insert(text, value);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedEntry {
    pub path: String,
    pub kind: PatchKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub path: String,
    pub kind: PatchKind,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchOutcome {
    pub applied: Vec<AppliedEntry>,
    pub skipped: Vec<SkippedEntry>,
    pub result_valid: bool,
}

impl PatchOutcome {
    pub fn skipped_with(&self, reason: SkipReason) -> usize {
        self.skipped.iter().filter(|s| s.reason == reason).count()
    }
}

/// Applies every update, then every add. Each entry stands alone: a failing
/// entry is recorded as skipped, and an entry that would introduce a schema
/// violation is rolled back.
pub fn apply_patch_set(
    doc: &SummaryDoc,
    patch: &PatchSet,
    schema: &Schema,
) -> (SummaryDoc, PatchOutcome) {
    let baseline: HashSet<Violation> = schema.validate(doc).violations.into_iter().collect();
    let introduces_violation = |candidate: &Value| {
        schema
            .validate(candidate)
            .violations
            .iter()
            .any(|v| !baseline.contains(v))
    };

    let mut current = doc.clone();
    let mut applied = Vec::new();
    let mut skipped = Vec::new();
    let skip = |skipped: &mut Vec<SkippedEntry>, path: &str, kind, reason| {
        skipped.push(SkippedEntry {
            path: path.to_string(),
            kind,
            reason,
        })
    };

    for (text, path, value) in patch.updates() {
        match apply_update(&current, path, value, schema) {
            Ok(next) if introduces_violation(&next) => {
                skip(&mut skipped, text, PatchKind::Update, SkipReason::SchemaViolation)
            }
            Ok(next) => {
                current = next;
                applied.push(AppliedEntry {
                    path: text.to_string(),
                    kind: PatchKind::Update,
                });
            }
            Err(e) => skip(&mut skipped, text, PatchKind::Update, SkipReason::from(&e)),
        }
    }

    let update_paths: HashSet<&JsonPath> = patch.updates().map(|(_, p, _)| p).collect();
    for (text, path, value) in patch.adds() {
        if update_paths.contains(path) {
            skip(&mut skipped, text, PatchKind::Add, SkipReason::ConflictsWithUpdate);
            continue;
        }
        match apply_add(&current, path, value, schema) {
            Ok(next) if introduces_violation(&next) => {
                skip(&mut skipped, text, PatchKind::Add, SkipReason::SchemaViolation)
            }
            Ok(next) => {
                current = next;
                applied.push(AppliedEntry {
                    path: text.to_string(),
                    kind: PatchKind::Add,
                });
            }
            Err(PatchError::KeyAlreadyExists(_)) => {
                match apply_update(&current, path, value, schema) {
                    Ok(next) if introduces_violation(&next) => {
                        skip(&mut skipped, text, PatchKind::Add, SkipReason::SchemaViolation)
                    }
                    Ok(next) => {
                        current = next;
                        skip(
                            &mut skipped,
                            text,
                            PatchKind::Add,
                            SkipReason::KeyAlreadyExistsConvertedToUpdate,
                        );
                    }
                    Err(e) => skip(&mut skipped, text, PatchKind::Add, SkipReason::from(&e)),
                }
            }
            Err(e) => skip(&mut skipped, text, PatchKind::Add, SkipReason::from(&e)),
        }
    }

    for rejected in patch.rejected() {
        skip(&mut skipped, &rejected.path, rejected.kind, rejected.reason);
    }

    let result_valid = schema.validate(&current).valid;
    (
        current,
        PatchOutcome {
            applied,
            skipped,
            result_valid,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{book_schema, entity_schema};
    use serde_json::json;

    fn p(text: &str) -> JsonPath {
        parse_path(text).unwrap()
    }

    fn partial_summary() -> Value {
        json!({"attributes": {
            "Amenities": ["two pools"],
            "Food & Beverage": ["limited breakfast options"]
        }})
    }

    #[test]
    fn parses_bare_and_quoted_segments() {
        assert_eq!(p("$.attributes.Amenities").segments(), ["attributes", "Amenities"]);
        assert_eq!(p("$.'attributes'.'Noise Level'").segments(), ["attributes", "Noise Level"]);
        assert_eq!(p("$.attributes.Food&Beverage").segments(), ["attributes", "Food&Beverage"]);
        assert_eq!(p(r"$.'a\'b'").segments(), ["a'b"]);
        assert_eq!(p(r"$.'a\\b'").segments(), [r"a\b"]);
    }

    #[test]
    fn parse_errors_carry_position() {
        let cases = [
            ("attributes.Amenities", 0, PathErrorKind::MissingRoot),
            ("", 0, PathErrorKind::MissingRoot),
            ("$", 1, PathErrorKind::EmptyPath),
            ("$.", 1, PathErrorKind::TrailingDot),
            ("$.a.", 3, PathErrorKind::TrailingDot),
            ("$..a", 2, PathErrorKind::EmptySegment),
            ("$.''", 2, PathErrorKind::EmptySegment),
            ("$.'abc", 2, PathErrorKind::UnterminatedQuote),
            ("$.a[0]", 3, PathErrorKind::Unsupported('[')),
            ("$.*", 2, PathErrorKind::Unsupported('*')),
            ("$[0]", 1, PathErrorKind::Unsupported('[')),
            ("$.Noise Level", 7, PathErrorKind::UnexpectedChar(' ')),
            (r"$.'a\n'", 4, PathErrorKind::InvalidEscape),
        ];
        for (text, position, kind) in cases {
            assert_eq!(parse_path(text), Err(PathError { position, kind }), "{text}");
        }
    }

    #[test]
    fn renders_canonical_form() {
        let path = JsonPath::from_segments(["attributes", "Amenities"]).unwrap();
        assert_eq!(render_path(&path), "$.'attributes'.'Amenities'");
        let path = JsonPath::from_segments(["attributes", "Noise Level"]).unwrap();
        assert_eq!(render_path(&path), "$.'attributes'.'Noise Level'");
        let path = JsonPath::from_segments(["a'b"]).unwrap();
        assert_eq!(render_path(&path), r"$.'a\'b'");
        assert!(JsonPath::from_segments(Vec::<String>::new()).is_none());
        assert!(JsonPath::from_segments([""]).is_none());
    }

    #[test]
    fn resolve_walks_keys() {
        let doc = json!({"attributes": {"Amenities": ["two pools"]}});
        assert_eq!(resolve(&doc, &p("$.attributes.Amenities")), Some(&json!(["two pools"])));
        assert_eq!(resolve(&doc, &p("$.attributes.'Noise Level'")), None);
        assert_eq!(resolve(&doc, &p("$.attributes")), Some(&doc["attributes"]));
        assert_eq!(resolve(&doc, &p("$.attributes.Amenities.x")), None);
    }

    #[test]
    fn update_appends_new_strings() {
        let schema = entity_schema();
        let path = p("$.'attributes'.'Amenities'");
        let out = apply_update(&partial_summary(), &path, &json!(["pub opens till midnight"]), &schema)
            .unwrap();
        assert_eq!(
            out["attributes"]["Amenities"],
            json!(["two pools", "pub opens till midnight"])
        );
        assert_eq!(out["attributes"]["Food & Beverage"], partial_summary()["attributes"]["Food & Beverage"]);

        let same = apply_update(&partial_summary(), &path, &json!(["two pools"]), &schema).unwrap();
        assert_eq!(same, partial_summary());
    }

    #[test]
    fn update_errors() {
        let schema = entity_schema();
        assert_eq!(
            apply_update(&partial_summary(), &p("$.'attributes'.'Pool'"), &json!(["x"]), &schema),
            Err(PatchError::PathNotFound("$.'attributes'.'Pool'".into()))
        );
        assert!(matches!(
            apply_update(&partial_summary(), &p("$.attributes.Amenities"), &json!("x"), &schema),
            Err(PatchError::TypeMismatch { .. })
        ));
        assert!(matches!(
            apply_update(&partial_summary(), &p("$.attributes.Amenities"), &json!([3]), &schema),
            Err(PatchError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn update_on_map_merges_recursively() {
        let schema = entity_schema();
        let out = apply_update(
            &partial_summary(),
            &p("$.attributes"),
            &json!({"Amenities": ["spa"], "Noise Level": ["quiet"]}),
            &schema,
        )
        .unwrap();
        assert_eq!(out["attributes"]["Amenities"], json!(["two pools", "spa"]));
        assert_eq!(out["attributes"]["Noise Level"], json!(["quiet"]));
    }

    #[test]
    fn add_inserts_new_key() {
        let schema = entity_schema();
        let path = p("$.'attributes'.'Noise Level'");
        let out = apply_add(&partial_summary(), &path, &json!(["Notable street noise at night"]), &schema)
            .unwrap();
        assert_eq!(resolve(&out, &path), Some(&json!(["Notable street noise at night"])));
        let keys: Vec<&String> = out["attributes"].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["Amenities", "Food & Beverage", "Noise Level"]);
    }

    #[test]
    fn add_errors() {
        let schema = entity_schema();
        assert_eq!(
            apply_add(&partial_summary(), &p("$.'attributes'.'Amenities'"), &json!(["x"]), &schema),
            Err(PatchError::KeyAlreadyExists("$.'attributes'.'Amenities'".into()))
        );
        assert_eq!(
            apply_add(&partial_summary(), &p("$.'ratings'.'x'"), &json!(["x"]), &schema),
            Err(PatchError::SchemaViolation("$.'ratings'.'x'".into()))
        );
        let missing_parent = json!({});
        assert_eq!(
            apply_add(&missing_parent, &p("$.attributes.x"), &json!(["x"]), &schema),
            Err(PatchError::ParentNotFound("$.'attributes'.'x'".into()))
        );
        assert!(matches!(
            apply_add(&partial_summary(), &p("$.attributes.New"), &json!({"a": 1}), &schema),
            Err(PatchError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn patch_set_composes_update_and_add() {
        let schema = entity_schema();
        let mut patch = PatchSet::new();
        patch.push_update("$.'attributes'.'Amenities'", json!(["pub opens till midnight"]));
        patch.push_add("$.'attributes'.'Noise Level'", json!(["Notable street noise at night"]));
        let (doc, outcome) = apply_patch_set(&partial_summary(), &patch, &schema);
        assert_eq!(
            doc,
            json!({"attributes": {
                "Amenities": ["two pools", "pub opens till midnight"],
                "Food & Beverage": ["limited breakfast options"],
                "Noise Level": ["Notable street noise at night"]
            }})
        );
        assert_eq!(outcome.applied.len(), 2);
        assert!(outcome.skipped.is_empty());
        assert!(outcome.result_valid);
    }

    #[test]
    fn empty_patch_is_identity() {
        let (doc, outcome) = apply_patch_set(&partial_summary(), &PatchSet::new(), &entity_schema());
        assert_eq!(doc, partial_summary());
        assert!(outcome.applied.is_empty() && outcome.skipped.is_empty());
    }

    #[test]
    fn unparseable_path_is_skipped() {
        let mut patch = PatchSet::new();
        patch.push_update("foo", json!(["x"]));
        let (doc, outcome) = apply_patch_set(&partial_summary(), &patch, &entity_schema());
        assert_eq!(doc, partial_summary());
        assert_eq!(outcome.skipped.len(), 1);
        assert_eq!(outcome.skipped[0].reason, SkipReason::UnparseablePath);
    }

    #[test]
    fn add_on_existing_key_downgrades() {
        let mut patch = PatchSet::new();
        patch.push_add("$.attributes.Amenities", json!(["spa"]));
        let (doc, outcome) = apply_patch_set(&partial_summary(), &patch, &entity_schema());
        assert_eq!(doc["attributes"]["Amenities"], json!(["two pools", "spa"]));
        assert_eq!(outcome.skipped_with(SkipReason::KeyAlreadyExistsConvertedToUpdate), 1);
        assert!(outcome.applied.is_empty());
    }

    #[test]
    fn update_wins_over_add_on_same_path() {
        let mut patch = PatchSet::new();
        patch.push_update("$.'attributes'.'Amenities'", json!(["spa"]));
        patch.push_add("$.attributes.Amenities", json!(["gym"]));
        let (doc, outcome) = apply_patch_set(&partial_summary(), &patch, &entity_schema());
        assert_eq!(doc["attributes"]["Amenities"], json!(["two pools", "spa"]));
        assert_eq!(outcome.applied.len(), 1);
        assert_eq!(outcome.skipped_with(SkipReason::ConflictsWithUpdate), 1);
    }

    #[test]
    fn failing_entries_do_not_abort_batch() {
        let mut patch = PatchSet::new();
        patch.push_update("$.attributes.Missing", json!(["x"]));
        patch.push_update("$.attributes.Amenities", json!("not a list"));
        patch.push_add("$.ratings.x", json!(["x"]));
        patch.push_add("$.attributes.Views", json!(["sea"]));
        let (doc, outcome) = apply_patch_set(&partial_summary(), &patch, &entity_schema());
        assert_eq!(doc["attributes"]["Views"], json!(["sea"]));
        assert_eq!(outcome.applied.len(), 1);
        assert_eq!(outcome.skipped_with(SkipReason::PathNotFound), 1);
        assert_eq!(outcome.skipped_with(SkipReason::TypeMismatch), 1);
        assert_eq!(outcome.skipped_with(SkipReason::SchemaViolation), 1);
    }

    #[test]
    fn book_patch_under_section() {
        let schema = book_schema();
        let mut patch = PatchSet::new();
        patch.push_add("$.characters.Ann", json!(["a nurse"]));
        let (doc, outcome) = apply_patch_set(&schema.empty_doc(), &patch, &schema);
        assert_eq!(doc["characters"]["Ann"], json!(["a nurse"]));
        assert!(outcome.result_valid);
    }

    #[test]
    fn wire_shape_round_trip() {
        let wire = json!({
            "$.'attributes'.'Amenities'": {"update": ["pub opens till midnight"]},
            "$.'attributes'.'Noise Level'": {"add": ["Notable street noise at night"]},
            "$.'attributes'.'X'": {"replace": ["?"]}
        });
        let set = PatchSet::from_wire(wire.as_object().unwrap());
        assert_eq!(set.update_count(), 1);
        assert_eq!(set.add_count(), 1);
        assert_eq!(set.rejected()[0].reason, SkipReason::MalformedEntry);
        let mut expected = wire.as_object().unwrap().clone();
        expected.shift_remove("$.'attributes'.'X'");
        assert_eq!(set.to_wire(), expected);
    }
}
