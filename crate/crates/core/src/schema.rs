//! Summary schemas: the shape a structured summary must take.
//!
//! The schema language has exactly four node kinds. `object` nodes have a
//! fixed, ordered set of named fields; `map` nodes accept any non-empty string
//! key; `list` and `string` are the leaves the built-in schemas bottom out in.

use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::doc::SummaryDoc;
use crate::pathpatch::{render_segments, JsonPath};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SchemaNode {
    Object { fields: IndexMap<String, SchemaNode> },
    Map { value_type: Box<SchemaNode> },
    List { element_type: Box<SchemaNode> },
    String,
}

impl SchemaNode {
    pub fn list_of_strings() -> Self {
        SchemaNode::List {
            element_type: Box::new(SchemaNode::String),
        }
    }

    pub fn map_of(value_type: SchemaNode) -> Self {
        SchemaNode::Map {
            value_type: Box::new(value_type),
        }
    }

    pub fn is_list_of_strings(&self) -> bool {
        matches!(self, SchemaNode::List { element_type } if **element_type == SchemaNode::String)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SchemaNode::Object { .. } => "object",
            SchemaNode::Map { .. } => "map",
            SchemaNode::List { .. } => "list",
            SchemaNode::String => "string",
        }
    }

    /// The smallest value conforming to this node.
    pub fn empty_value(&self) -> Value {
        match self {
            SchemaNode::Object { fields } => Value::Object(
                fields
                    .iter()
                    .map(|(name, node)| (name.clone(), node.empty_value()))
                    .collect(),
            ),
            SchemaNode::Map { .. } => Value::Object(Map::new()),
            SchemaNode::List { .. } => Value::Array(Vec::new()),
            SchemaNode::String => Value::String(String::new()),
        }
    }

    fn type_text(&self) -> String {
        match self {
            SchemaNode::String => "str".to_string(),
            SchemaNode::List { element_type } => format!("list[{}]", element_type.type_text()),
            SchemaNode::Map { value_type } => format!("dict[str, {}]", value_type.type_text()),
            SchemaNode::Object { fields } => {
                let inner: Vec<String> = fields
                    .iter()
                    .map(|(name, node)| format!("{name}: {}", node.type_text()))
                    .collect();
                format!("{{{}}}", inner.join(", "))
            }
        }
    }

    fn check(&self, path: &str) -> Result<(), SchemaError> {
        match self {
            SchemaNode::Object { fields } => {
                for (name, node) in fields {
                    if name.is_empty() {
                        return Err(SchemaError::EmptyFieldName(path.to_string()));
                    }
                    node.check(&format!("{path}.{name}"))?;
                }
                Ok(())
            }
            SchemaNode::Map { value_type } => value_type.check(&format!("{path}.*")),
            SchemaNode::List { element_type } => element_type.check(&format!("{path}[]")),
            SchemaNode::String => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub root: SchemaNode,
    /// Optional per-field comments shown in the class text handed to the LLM.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub field_notes: IndexMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("schema root must be an object node, found {0}")]
    RootNotObject(&'static str),
    #[error("empty field name under {0}")]
    EmptyFieldName(String),
    #[error("invalid schema document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("reading schema file: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown built-in schema `{0}`")]
    UnknownBuiltin(String),
}

/// Entity summaries: `{"attributes": {<attribute>: [<value>, ...]}}`.
pub fn entity_schema() -> Schema {
    let mut fields = IndexMap::new();
    fields.insert(
        "attributes".to_string(),
        SchemaNode::map_of(SchemaNode::list_of_strings()),
    );
    let mut field_notes = IndexMap::new();
    field_notes.insert(
        "attributes".to_string(),
        "Keyed by attribute, with a list of sufficient details about the attribute.".to_string(),
    );
    Schema {
        name: "entity".to_string(),
        root: SchemaNode::Object { fields },
        field_notes,
    }
}

pub const BOOK_FIELDS: [&str; 6] = [
    "characters",
    "events",
    "background",
    "motivations",
    "objectives",
    "other",
];

/// Book summaries: six maps from element name to a list of short explanations.
pub fn book_schema() -> Schema {
    let fields = BOOK_FIELDS
        .iter()
        .map(|name| {
            (
                name.to_string(),
                SchemaNode::map_of(SchemaNode::list_of_strings()),
            )
        })
        .collect();
    Schema {
        name: "book".to_string(),
        root: SchemaNode::Object { fields },
        field_notes: IndexMap::new(),
    }
}

impl Schema {
    pub fn new(name: impl Into<String>, root: SchemaNode) -> Result<Self, SchemaError> {
        let schema = Schema {
            name: name.into(),
            root,
            field_notes: IndexMap::new(),
        };
        schema.check()?;
        Ok(schema)
    }

    pub fn from_json_str(text: &str) -> Result<Self, SchemaError> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.check()?;
        Ok(schema)
    }

    /// Resolves `entity`, `book`, or a path to a schema file.
    pub fn load(reference: &str) -> Result<Self, SchemaError> {
        match reference {
            "entity" => Ok(entity_schema()),
            "book" => Ok(book_schema()),
            other => {
                let path = Path::new(other);
                if !path.exists() {
                    return Err(SchemaError::UnknownBuiltin(other.to_string()));
                }
                Self::from_json_str(&std::fs::read_to_string(path)?)
            }
        }
    }

    fn check(&self) -> Result<(), SchemaError> {
        if !matches!(self.root, SchemaNode::Object { .. }) {
            return Err(SchemaError::RootNotObject(self.root.kind_name()));
        }
        self.root.check("$")
    }

    pub fn root_fields(&self) -> &IndexMap<String, SchemaNode> {
        match &self.root {
            SchemaNode::Object { fields } => fields,
            _ => unreachable!("root is checked to be an object"),
        }
    }

    /// A document with every top-level field present and empty.
    pub fn empty_doc(&self) -> SummaryDoc {
        self.root.empty_value()
    }

    /// Python-style class definition used in prompts.
    pub fn class_text(&self) -> String {
        let mut out = String::from("class Summary(TypedDict):");
        for (name, node) in self.root_fields() {
            out.push_str(&format!("\n  {name}: {}", node.type_text()));
            if let Some(note) = self.field_notes.get(name) {
                out.push_str(&format!("  # {note}"));
            }
        }
        out
    }

    /// The schema node governing the value at `path`. Map nodes consume one
    /// arbitrary key per segment.
    pub fn node_at(&self, path: &JsonPath) -> Option<&SchemaNode> {
        let mut node = &self.root;
        for segment in path.segments() {
            node = match node {
                SchemaNode::Object { fields } => fields.get(segment)?,
                SchemaNode::Map { value_type } => value_type,
                SchemaNode::List { .. } | SchemaNode::String => return None,
            };
        }
        Some(node)
    }

    /// Adapts a model reply to the root shape. A reply that omits the single
    /// root field of a one-field schema (`{"Room": [...]}` instead of
    /// `{"attributes": {"Room": [...]}}`) is wrapped, and absent root fields
    /// are filled with empty values. Nothing else is changed.
    pub fn lift_single_field(&self, reply: Value) -> Value {
        let fields = self.root_fields();
        let Value::Object(map) = reply else {
            return reply;
        };
        let mut map = if fields.len() == 1 && !map.is_empty() {
            let (name, _) = fields.first().expect("one field");
            if map.contains_key(name) {
                map
            } else {
                let mut wrapped = Map::new();
                wrapped.insert(name.clone(), Value::Object(map));
                wrapped
            }
        } else {
            map
        };
        for (name, node) in fields {
            if !map.contains_key(name) {
                map.insert(name.clone(), node.empty_value());
            }
        }
        Value::Object(map)
    }

    pub fn validate(&self, doc: &SummaryDoc) -> ValidationReport {
        let mut violations = Vec::new();
        let mut path = Vec::new();
        check_value(&self.root, doc, &mut path, true, &mut violations);
        ValidationReport::from_violations(violations)
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.class_text())
    }
}

/// Free-function form of [`Schema::validate`].
pub fn validate(schema: &Schema, doc: &SummaryDoc) -> ValidationReport {
    schema.validate(doc)
}

/// Free-function form of [`Schema::node_at`].
pub fn node_at<'a>(schema: &'a Schema, path: &JsonPath) -> Option<&'a SchemaNode> {
    schema.node_at(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationReason {
    UnknownField,
    /// A required top-level field is absent.
    MissingField,
    LeafTypeMismatch,
    /// Map keys must be non-empty strings.
    NonStringKey,
    NonListValue,
    NonStringElement,
}

impl fmt::Display for ViolationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            ViolationReason::UnknownField => "unknown-field",
            ViolationReason::MissingField => "missing-field",
            ViolationReason::LeafTypeMismatch => "leaf-type-mismatch",
            ViolationReason::NonStringKey => "non-string-key",
            ViolationReason::NonListValue => "non-list-value",
            ViolationReason::NonStringElement => "non-string-element",
        };
        f.write_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    /// Canonical path text, `$` for the document root.
    pub path: String,
    pub reason: ViolationReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, path: &str, reason: ViolationReason) -> bool {
        self.violations
            .iter()
            .any(|v| v.path == path && v.reason == reason)
    }
}

fn push(out: &mut Vec<Violation>, path: &[String], reason: ViolationReason) {
    out.push(Violation {
        path: render_segments(path),
        reason,
    });
}

// Object fields are only required at the root; nested objects may be partial.
fn check_value(
    node: &SchemaNode,
    value: &Value,
    path: &mut Vec<String>,
    is_root: bool,
    out: &mut Vec<Violation>,
) {
    match node {
        SchemaNode::Object { fields } => {
            let Value::Object(map) = value else {
                push(out, path, ViolationReason::LeafTypeMismatch);
                return;
            };
            for (key, child) in map {
                path.push(key.clone());
                match fields.get(key) {
                    Some(child_node) => check_value(child_node, child, path, false, out),
                    None => push(out, path, ViolationReason::UnknownField),
                }
                path.pop();
            }
            if is_root {
                for name in fields.keys() {
                    if !map.contains_key(name) {
                        path.push(name.clone());
                        push(out, path, ViolationReason::MissingField);
                        path.pop();
                    }
                }
            }
        }
        SchemaNode::Map { value_type } => {
            let Value::Object(map) = value else {
                push(out, path, ViolationReason::LeafTypeMismatch);
                return;
            };
            for (key, child) in map {
                path.push(key.clone());
                if key.is_empty() {
                    push(out, path, ViolationReason::NonStringKey);
                } else {
                    check_value(value_type, child, path, false, out);
                }
                path.pop();
            }
        }
        SchemaNode::List { element_type } => match value {
            Value::Array(items) => {
                for item in items {
                    if **element_type == SchemaNode::String && !item.is_string() {
                        push(out, path, ViolationReason::NonStringElement);
                    } else {
                        check_value(element_type, item, path, false, out);
                    }
                }
            }
            Value::String(_) => push(out, path, ViolationReason::LeafTypeMismatch),
            _ => push(out, path, ViolationReason::NonListValue),
        },
        SchemaNode::String => {
            if !value.is_string() {
                push(out, path, ViolationReason::LeafTypeMismatch);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathpatch::parse_path;
    use serde_json::json;

    #[test]
    fn lifts_flat_entity_replies() {
        let schema = entity_schema();
        assert_eq!(
            schema.lift_single_field(json!({"Room": ["big"]})),
            json!({"attributes": {"Room": ["big"]}})
        );
        let wrapped = json!({"attributes": {"Room": ["big"]}});
        assert_eq!(schema.lift_single_field(wrapped.clone()), wrapped);
        assert_eq!(schema.lift_single_field(json!({})), json!({"attributes": {}}));
        let book = book_schema().lift_single_field(json!({"characters": {"Ann": ["nurse"]}}));
        assert!(book_schema().validate(&book).valid);
        assert_eq!(book["other"], json!({}));
    }

    #[test]
    fn entity_schema_shape() {
        let schema = entity_schema();
        let fields = schema.root_fields();
        assert_eq!(fields.len(), 1);
        assert!(matches!(
            &fields["attributes"],
            SchemaNode::Map { value_type } if value_type.is_list_of_strings()
        ));
    }

    #[test]
    fn entity_docs_validate() {
        let schema = entity_schema();
        assert!(schema.validate(&json!({"attributes": {}})).valid);
        assert!(schema.validate(&json!({"attributes": {"Service": ["Friendly staff"]}})).valid);
        assert!(schema.validate(&json!({"attributes": {"Amenities": ["two pools"]}})).valid);
        assert!(schema
            .validate(&json!({"attributes": {"Food & Beverage": ["limited breakfast options"]}}))
            .valid);
    }

    #[test]
    fn string_where_list_required() {
        let report = entity_schema().validate(&json!({"attributes": {"Amenities": "two pools"}}));
        assert!(!report.valid);
        assert!(report.has("$.'attributes'.'Amenities'", ViolationReason::LeafTypeMismatch));
    }

    #[test]
    fn unknown_top_level_field() {
        let report = entity_schema().validate(&json!({"notes": []}));
        assert!(!report.valid);
        assert!(report.has("$.'notes'", ViolationReason::UnknownField));
    }

    #[test]
    fn other_violation_kinds() {
        let schema = entity_schema();
        let report = schema.validate(&json!({"attributes": {"A": [1], "B": {"x": 1}, "": []}}));
        assert!(report.has("$.'attributes'.'A'", ViolationReason::NonStringElement));
        assert!(report.has("$.'attributes'.'B'", ViolationReason::NonListValue));
        assert!(report.has("$.'attributes'.''", ViolationReason::NonStringKey));
        let report = schema.validate(&json!([]));
        assert!(report.has("$", ViolationReason::LeafTypeMismatch));
    }

    #[test]
    fn book_schema_field_order() {
        let schema = book_schema();
        let names: Vec<&str> = schema.root_fields().keys().map(String::as_str).collect();
        assert_eq!(names, BOOK_FIELDS);
        assert!(schema.validate(&schema.empty_doc()).valid);
    }

    #[test]
    fn book_requires_all_sections() {
        let schema = book_schema();
        let report = schema.validate(&json!({"characters": {"Ann": ["a nurse"]}}));
        assert!(!report.valid);
        let missing = report
            .violations
            .iter()
            .filter(|v| v.reason == ViolationReason::MissingField)
            .count();
        assert_eq!(missing, 5);

        let mut doc = schema.empty_doc();
        doc["plot"] = json!({});
        let report = schema.validate(&doc);
        assert!(report.has("$.'plot'", ViolationReason::UnknownField));
    }

    #[test]
    fn node_at_walks_maps() {
        let schema = entity_schema();
        let leaf = schema.node_at(&parse_path("$.attributes.Amenities").unwrap()).unwrap();
        assert!(leaf.is_list_of_strings());
        let map = schema.node_at(&parse_path("$.attributes").unwrap()).unwrap();
        assert!(matches!(map, SchemaNode::Map { .. }));
        assert!(schema.node_at(&parse_path("$.rooms.Amenities").unwrap()).is_none());
        assert!(schema.node_at(&parse_path("$.attributes.A.deeper").unwrap()).is_none());
    }

    #[test]
    fn schema_file_round_trip() {
        let text = serde_json::to_string(&book_schema()).unwrap();
        assert_eq!(Schema::from_json_str(&text).unwrap(), book_schema());
        let custom = r#"{"name":"hotel","root":{"kind":"object","fields":{
            "name":{"kind":"string"},
            "rooms":{"kind":"map","value_type":{"kind":"list","element_type":{"kind":"string"}}}}}}"#;
        let schema = Schema::from_json_str(custom).unwrap();
        assert_eq!(schema.root_fields().len(), 2);
        assert!(schema.validate(&json!({"name": "H", "rooms": {"101": ["sea view"]}})).valid);
    }

    #[test]
    fn rejects_bad_schema_files() {
        assert!(matches!(
            Schema::from_json_str(r#"{"name":"x","root":{"kind":"string"}}"#),
            Err(SchemaError::RootNotObject("string"))
        ));
        assert!(matches!(
            Schema::from_json_str(r#"{"name":"x","root":{"kind":"object","fields":{"":{"kind":"string"}}}}"#),
            Err(SchemaError::EmptyFieldName(_))
        ));
        assert!(Schema::from_json_str(r#"{"name":"x","root":{"kind":"tuple"}}"#).is_err());
    }

    #[test]
    fn class_text_matches_prompt_form() {
        assert_eq!(
            entity_schema().class_text(),
            "class Summary(TypedDict):\n  attributes: dict[str, list[str]]  # Keyed by attribute, with a list of sufficient details about the attribute."
        );
        assert!(book_schema().class_text().contains("  other: dict[str, list[str]]"));
    }
}
