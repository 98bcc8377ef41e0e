//! Entity-stream datasets: JSON-lines files, one record per entity.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::doc::SummaryDoc;
use crate::pipeline::DocumentStream;
use crate::schema::Schema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityStreamRecord {
    pub entity: String,
    pub paragraphs: Vec<String>,
    /// Gold summary after each paragraph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_per_turn: Option<Vec<SummaryDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_final: Option<SummaryDoc>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("record `{entity}` has {found} gold turn(s) for {expected} paragraph(s)")]
    GoldLength { entity: String, expected: usize, found: usize },
    #[error("record `{entity}` has no paragraphs")]
    NoParagraphs { entity: String },
    #[error("record `{entity}`: gold {which} does not conform to schema `{schema}`")]
    GoldInvalid { entity: String, which: String, schema: String },
}

impl EntityStreamRecord {
    pub fn check(&self) -> Result<(), DatasetError> {
        if self.paragraphs.is_empty() {
            return Err(DatasetError::NoParagraphs { entity: self.entity.clone() });
        }
        if let Some(gold) = &self.gold_per_turn {
            if gold.len() != self.paragraphs.len() {
                return Err(DatasetError::GoldLength {
                    entity: self.entity.clone(),
                    expected: self.paragraphs.len(),
                    found: gold.len(),
                });
            }
        }
        Ok(())
    }

    /// Wraps flat gold maps into the schema's shape and checks them.
    pub fn conform_gold(&mut self, schema: &Schema) -> Result<(), DatasetError> {
        let entity = self.entity.clone();
        let fix = |doc: &mut SummaryDoc, which: String| {
            *doc = schema.lift_single_field(std::mem::take(doc));
            if schema.validate(doc).valid {
                Ok(())
            } else {
                Err(DatasetError::GoldInvalid {
                    entity: entity.clone(),
                    which,
                    schema: schema.name.clone(),
                })
            }
        };
        if let Some(gold) = &mut self.gold_per_turn {
            for (turn, doc) in gold.iter_mut().enumerate() {
                fix(doc, format!("turn {turn}"))?;
            }
        }
        if let Some(doc) = &mut self.gold_final {
            fix(doc, "final".into())?;
        }
        Ok(())
    }

    pub fn stream(&self) -> DocumentStream {
        DocumentStream::new(self.entity.clone(), self.paragraphs.clone())
    }

    /// Gold for the summary after `turn`, falling back to the final gold on
    /// the last turn.
    pub fn gold_at(&self, turn: usize) -> Option<&SummaryDoc> {
        let per_turn = self.gold_per_turn.as_ref().and_then(|g| g.get(turn));
        per_turn.or_else(|| {
            (turn + 1 == self.paragraphs.len())
                .then_some(self.gold_final.as_ref())
                .flatten()
        })
    }

    /// Gold for the whole stream.
    pub fn final_gold(&self) -> Option<&SummaryDoc> {
        self.gold_final
            .as_ref()
            .or_else(|| self.gold_per_turn.as_ref().and_then(|g| g.last()))
    }
}

/// Reads and checks every record. Blank lines are skipped.
pub fn load_records(path: &Path, schema: &Schema) -> Result<Vec<EntityStreamRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_records(&text, path, schema)
}

pub fn parse_records(text: &str, path: &Path, schema: &Schema) -> Result<Vec<EntityStreamRecord>, DatasetError> {
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut record: EntityStreamRecord =
            serde_json::from_str(line).map_err(|source| DatasetError::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                source,
            })?;
        record.check()?;
        record.conform_gold(schema)?;
        records.push(record);
    }
    Ok(records)
}

/// One record per line.
pub fn write_records(records: &[EntityStreamRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::entity_schema;
    use serde_json::json;

    #[test]
    fn parses_and_lifts_gold() {
        let text = r#"{"entity":"H","paragraphs":["a","b"],"gold_per_turn":[{"A":["x"]},{"attributes":{"A":["x","y"]}}]}"#;
        let records = parse_records(text, Path::new("d.jsonl"), &entity_schema()).unwrap();
        assert_eq!(records[0].gold_at(0), Some(&json!({"attributes": {"A": ["x"]}})));
        assert_eq!(records[0].final_gold(), Some(&json!({"attributes": {"A": ["x", "y"]}})));
        assert_eq!(records[0].stream().documents.len(), 2);
    }

    #[test]
    fn mismatched_gold_names_the_record() {
        let text = r#"{"entity":"HOTEL7","paragraphs":["a","b"],"gold_per_turn":[{"A":["x"]}]}"#;
        let err = parse_records(text, Path::new("d.jsonl"), &entity_schema()).unwrap_err();
        assert!(err.to_string().contains("HOTEL7"), "{err}");
    }

    #[test]
    fn bad_json_reports_line() {
        let text = "\n{\"entity\":";
        let err = parse_records(text, Path::new("d.jsonl"), &entity_schema()).unwrap_err();
        assert!(matches!(err, DatasetError::Parse { line: 2, .. }));
    }

    #[test]
    fn round_trip() {
        let record = EntityStreamRecord {
            entity: "H".into(),
            paragraphs: vec!["p".into()],
            gold_per_turn: None,
            gold_final: Some(json!({"attributes": {}})),
        };
        let text = write_records(std::slice::from_ref(&record));
        assert_eq!(parse_records(&text, Path::new("x"), &entity_schema()).unwrap(), vec![record]);
    }
}
