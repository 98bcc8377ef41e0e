//! Summary documents and small helpers shared by every module.
//!
//! A summary is an ordinary JSON value. Objects keep insertion order so
//! serialization is byte-stable across runs.

use serde_json::Value;

/// A structured summary instance (the memory state at one turn).
pub type SummaryDoc = Value;

/// Compact serialization, the form embedded in prompts and counted against
/// token budgets.
pub fn to_compact(doc: &SummaryDoc) -> String {
    serde_json::to_string(doc).expect("serializing a JSON value cannot fail")
}

/// Every `(key path, string)` pair found at a leaf of `doc`.
///
/// List elements contribute their parent's path; the position inside the list
/// is not part of the key.
pub fn leaf_strings(doc: &SummaryDoc) -> Vec<(Vec<String>, String)> {
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    collect_leaves(doc, &mut prefix, &mut out);
    out
}

fn collect_leaves(value: &Value, prefix: &mut Vec<String>, out: &mut Vec<(Vec<String>, String)>) {
    match value {
        Value::Object(map) => {
            for (key, child) in map {
                prefix.push(key.clone());
                collect_leaves(child, prefix, out);
                prefix.pop();
            }
        }
        Value::Array(items) => {
            for item in items {
                collect_leaves(item, prefix, out);
            }
        }
        Value::String(s) => out.push((prefix.clone(), s.clone())),
        _ => {}
    }
}

/// All key paths that name an object member, in document order.
pub fn key_paths(doc: &SummaryDoc) -> Vec<Vec<String>> {
    fn walk(value: &Value, prefix: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        if let Value::Object(map) = value {
            for (key, child) in map {
                prefix.push(key.clone());
                out.push(prefix.clone());
                walk(child, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(doc, &mut Vec::new(), &mut out);
    out
}

/// Line-per-key text rendering: `Key: value one; value two`.
///
/// Documents with more than one top-level field get a `## field` header per
/// section, sections separated by a blank line. Nested keys are joined with
/// ` / `.
pub fn render_text_summary(doc: &SummaryDoc) -> String {
    let Value::Object(root) = doc else {
        return String::new();
    };
    let lines_for = |value: &Value| {
        let mut lines = Vec::new();
        let mut grouped: Vec<(String, Vec<String>)> = Vec::new();
        for (path, text) in leaf_strings(value) {
            let key = path.join(" / ");
            match grouped.last_mut() {
                Some((last, values)) if *last == key => values.push(text),
                _ => grouped.push((key, vec![text])),
            }
        }
        for (key, values) in grouped {
            lines.push(format!("{key}: {}", values.join("; ")));
        }
        lines
    };
    if root.len() == 1 {
        let (_, only) = root.iter().next().expect("one field");
        return lines_for(only).join("\n");
    }
    root.iter()
        .map(|(field, value)| {
            let mut section = vec![format!("## {field}")];
            section.extend(lines_for(value));
            section.join("\n")
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Reads `Key: v1; v2` lines back out of text produced by
/// [`render_text_summary`]. Lines without `": "` and header lines are skipped.
pub fn parse_text_summary(text: &str) -> Vec<(String, Vec<String>)> {
    text.lines()
        .filter(|line| !line.starts_with("## "))
        .filter_map(|line| {
            let (key, rest) = line.split_once(": ")?;
            let key = key.trim();
            if key.is_empty() {
                return None;
            }
            let values = rest
                .split("; ")
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(str::to_string)
                .collect();
            Some((key.to_string(), values))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn leaves_carry_parent_path() {
        let doc = json!({"attributes": {"A": ["x", "y"], "B": ["z"]}});
        let leaves = leaf_strings(&doc);
        assert_eq!(leaves.len(), 3);
        assert_eq!(leaves[0], (vec!["attributes".into(), "A".into()], "x".into()));
        assert_eq!(leaves[2].0, vec!["attributes".to_string(), "B".to_string()]);
    }

    #[test]
    fn compact_has_no_padding() {
        let doc = json!({"attributes": {"A": ["x"]}});
        assert_eq!(to_compact(&doc), r#"{"attributes":{"A":["x"]}}"#);
    }

    #[test]
    fn text_rendering_round_trips() {
        let doc = json!({"attributes": {"Location": ["near the beach"], "Pool": ["heated", "open late"]}});
        let text = render_text_summary(&doc);
        assert_eq!(text, "Location: near the beach\nPool: heated; open late");
        assert_eq!(
            parse_text_summary(&text),
            vec![
                ("Location".to_string(), vec!["near the beach".to_string()]),
                ("Pool".to_string(), vec!["heated".to_string(), "open late".to_string()]),
            ]
        );
        assert_eq!(render_text_summary(&json!({"attributes": {}})), "");
    }

    #[test]
    fn multi_field_docs_get_sections() {
        let doc = json!({"characters": {"Ann": ["a nurse"]}, "events": {}});
        assert_eq!(render_text_summary(&doc), "## characters\nAnn: a nurse\n\n## events");
        assert_eq!(parse_text_summary(&render_text_summary(&doc)).len(), 1);
    }
}
