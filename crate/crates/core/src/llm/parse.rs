//! Pulling JSON out of free-form model replies.
//!
//! Replies wrap JSON in prose and code fences, and often carry trailing
//! commas (the prompt examples do too). Parsing tolerates both.

use serde_json::{Map, Value};

use crate::doc::SummaryDoc;
use crate::pathpatch::{PatchKind, PatchSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("no JSON object found in reply")]
    NoJsonFound,
    #[error("malformed JSON at byte offset {offset}: {message}")]
    MalformedJson { offset: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{marker} section: {source}")]
pub struct CokParseError {
    pub marker: &'static str,
    #[source]
    pub source: ExtractError,
}

pub const UPDATED_MARKER: &str = "[UPDATED OBJECTS]";
pub const ADDED_MARKER: &str = "[ADDED OBJECTS]";
const SECTION_MARKERS: [&str; 4] = [
    "[THOUGHTS FOR UPDATE]",
    UPDATED_MARKER,
    "[THOUGHTS FOR ADD]",
    ADDED_MARKER,
];

/// Returns the first balanced JSON object, looking inside the first code
/// fence when one is present.
pub fn extract_json(text: &str) -> Result<SummaryDoc, ExtractError> {
    if let Some(inner) = fenced_block(text) {
        match extract_object(inner.1, inner.0) {
            Err(ExtractError::NoJsonFound) => {}
            other => return other,
        }
    }
    extract_object(text, 0)
}

// (byte offset of the block in `text`, block contents)
fn fenced_block(text: &str) -> Option<(usize, &str)> {
    let open = text.find("```")?;
    let after_ticks = open + 3;
    let body_start = {
        let nl = text[after_ticks..].find('\n')?;
        after_ticks + nl + 1
    };
    let body_end = text[body_start..]
        .find("```")
        .map_or(text.len(), |i| body_start + i);
    Some((body_start, &text[body_start..body_end]))
}

fn extract_object(text: &str, base: usize) -> Result<Value, ExtractError> {
    let start = text.find('{').ok_or(ExtractError::NoJsonFound)?;
    let end = balanced_end(&text[start..]).ok_or_else(|| ExtractError::MalformedJson {
        offset: base + start,
        message: "unbalanced braces".to_string(),
    })?;
    let snippet = strip_trailing_commas(&text[start..start + end]);
    serde_json::from_str::<Value>(&snippet).map_err(|e| ExtractError::MalformedJson {
        offset: base + start + line_col_offset(&snippet, e.line(), e.column()),
        message: e.to_string(),
    })
}

// Length of the balanced `{...}` prefix, honoring string literals.
fn balanced_end(text: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, b) in text.bytes().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

fn strip_trailing_commas(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut last = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b',' => {
                let next = bytes[i + 1..].iter().find(|c| !c.is_ascii_whitespace());
                if matches!(next, Some(b'}') | Some(b']')) {
                    out.push_str(&text[last..i]);
                    last = i + 1;
                }
            }
            _ => {}
        }
    }
    out.push_str(&text[last..]);
    out
}

fn line_col_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Parses the `[UPDATED OBJECTS]` / `[ADDED OBJECTS]` sections of a reply.
/// A missing section contributes nothing; a present section must hold a
/// JSON object.
pub fn parse_cok_response(text: &str) -> Result<PatchSet, CokParseError> {
    let mut set = PatchSet::new();
    for (marker, kind) in [(UPDATED_MARKER, PatchKind::Update), (ADDED_MARKER, PatchKind::Add)] {
        let Some(section) = section_body(text, marker) else {
            continue;
        };
        let value = extract_object(section, 0).map_err(|e| CokParseError {
            marker,
            source: match e {
                ExtractError::NoJsonFound => ExtractError::MalformedJson {
                    offset: 0,
                    message: "section holds no JSON object".into(),
                },
                other => other,
            },
        })?;
        let Value::Object(map) = value else {
            unreachable!("extract_object only returns objects")
        };
        set.extend_from_wire(&map, kind);
    }
    Ok(set)
}

// Text after the last occurrence of `marker`, up to the next section marker.
fn section_body<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    let start = text.rfind(marker)? + marker.len();
    let rest = &text[start..];
    let end = SECTION_MARKERS
        .iter()
        .filter_map(|m| rest.find(m))
        .min()
        .unwrap_or(rest.len());
    Some(&rest[..end])
}

/// Renders a patch set into the reply skeleton `parse_cok_response` reads.
pub fn render_cok_response(set: &PatchSet) -> String {
    let pretty = |map: Map<String, Value>| {
        serde_json::to_string_pretty(&Value::Object(map)).expect("JSON values serialize")
    };
    format!(
        "{UPDATED_MARKER}\n{}\n\n{ADDED_MARKER}\n{}\n",
        pretty(set.updates_wire()),
        pretty(set.adds_wire())
    )
}
