//! Incremental structured summarization.
//!
//! A stream of documents is folded into a schema-constrained JSON summary.
//! Besides whole-summary regeneration and merging baselines, the library
//! implements chain-of-key updating: the model proposes path-addressed
//! `update`/`add` operations which are validated and applied programmatically.

pub mod dataset;
pub mod doc;
pub mod eval;
pub mod llm;
pub mod memory;
pub mod pathpatch;
pub mod pipeline;
pub mod schema;

pub use doc::{render_text_summary, to_compact, SummaryDoc};
pub use pathpatch::{apply_patch_set, parse_path, JsonPath, PatchSet};
pub use schema::{book_schema, entity_schema, Schema, SchemaNode};
