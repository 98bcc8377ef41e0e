//! Input builders shared by the benchmarks.

use chainkey_core::{PatchSet, SummaryDoc};
use serde_json::{json, Map, Value};

/// An entity summary with `attributes` keys of `values` strings each.
pub fn entity_doc(attributes: usize, values: usize, tag: &str) -> SummaryDoc {
    let mut map = Map::new();
    for a in 0..attributes {
        let list: Vec<Value> = (0..values)
            .map(|v| Value::String(format!("{tag} value {v} of attribute {a}")))
            .collect();
        map.insert(format!("Attribute {a}"), Value::Array(list));
    }
    json!({ "attributes": map })
}

/// Updates to every other existing attribute and `adds` new attributes.
pub fn patch_for(attributes: usize, adds: usize) -> PatchSet {
    let mut patch = PatchSet::new();
    for a in (0..attributes).step_by(2) {
        patch.push_update(format!("$.'attributes'.'Attribute {a}'"), json!(["updated"]));
    }
    for n in 0..adds {
        patch.push_add(format!("$.'attributes'.'New {n}'"), json!(["added"]));
    }
    patch
}

/// Prose-like text of roughly `bytes` bytes with paragraph breaks.
pub fn text_of(bytes: usize) -> String {
    let words = ["harbour", "lamp", "keeper", "reef", "storm", "ledger", "tide", "rope"];
    let mut out = String::with_capacity(bytes + 16);
    let mut i = 0usize;
    while out.len() < bytes {
        out.push_str(words[i % words.len()]);
        i += 1;
        out.push_str(if i.is_multiple_of(97) { ".\n\n" } else if i.is_multiple_of(13) { ". " } else { " " });
    }
    out
}
