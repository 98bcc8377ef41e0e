//! Prompt templates.
//!
//! Placeholders are written `{name}` where `name` is lowercase ASCII letters
//! and underscores. Any other brace (the JSON examples inside the prompts) is
//! literal text. Substitution is a single left-to-right pass, so bound values
//! are never re-scanned.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    GenerateEntity,
    GenerateEntityText,
    UpdateEntity,
    UpdateEntityText,
    Dedup,
    Cok,
    CokBook,
    Compress,
    GenerateBook,
    UpdateBook,
    JsonInstruction,
    TextInstruction,
    FinalText,
    MatchJudge,
    CoherenceJudge,
}

impl TemplateId {
    pub const ALL: [TemplateId; 15] = [
        TemplateId::GenerateEntity,
        TemplateId::GenerateEntityText,
        TemplateId::UpdateEntity,
        TemplateId::UpdateEntityText,
        TemplateId::Dedup,
        TemplateId::Cok,
        TemplateId::CokBook,
        TemplateId::Compress,
        TemplateId::GenerateBook,
        TemplateId::UpdateBook,
        TemplateId::JsonInstruction,
        TemplateId::TextInstruction,
        TemplateId::FinalText,
        TemplateId::MatchJudge,
        TemplateId::CoherenceJudge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::GenerateEntity => "generate-entity",
            TemplateId::GenerateEntityText => "generate-entity-text",
            TemplateId::UpdateEntity => "update-entity",
            TemplateId::UpdateEntityText => "update-entity-text",
            TemplateId::Dedup => "dedup",
            TemplateId::Cok => "cok",
            TemplateId::CokBook => "cok-book",
            TemplateId::Compress => "compress",
            TemplateId::GenerateBook => "generate-book",
            TemplateId::UpdateBook => "update-book",
            TemplateId::JsonInstruction => "json-instruction",
            TemplateId::TextInstruction => "text-instruction",
            TemplateId::FinalText => "final-text",
            TemplateId::MatchJudge => "match-judge",
            TemplateId::CoherenceJudge => "coherence-judge",
        }
    }

    pub fn body(self) -> String {
        match self {
            TemplateId::GenerateEntity => GENERATE_ENTITY.to_string(),
            TemplateId::GenerateEntityText => GENERATE_ENTITY
                .replace(GENERATE_ENTITY_JSON_EXAMPLE, GENERATE_ENTITY_TEXT_EXAMPLE)
                .replace(PROCEED_GENERATE_JSON, "Proceed to generate the summary text."),
            TemplateId::UpdateEntity => UPDATE_ENTITY.to_string(),
            TemplateId::UpdateEntityText => UPDATE_ENTITY
                .replace(UPDATE_ENTITY_JSON_EXAMPLE, UPDATE_ENTITY_TEXT_EXAMPLE)
                .replace(
                    "Update the summary Json with the given new descriptions",
                    "Update the summary text with the given new descriptions",
                )
                .replace("Given Existing Summary Json:", "Given Existing Summary:")
                .replace("Proceed to update the summary Json.", "Proceed to update the summary text."),
            TemplateId::Dedup => format!("{REMOVE_DUPLICATES}{DEDUP_TASK}"),
            TemplateId::Cok => format!(
                "{COK_INTRO}{COK_BOTH_ENTITY}{COK_EXAMPLE}{COK_TASK}"
            ),
            TemplateId::CokBook => format!("{COK_INTRO}{COK_BOTH_BOOK}{COK_EXAMPLE}{COK_TASK}"),
            TemplateId::Compress => format!("{COMPRESS}{COMPRESS_TASK}"),
            TemplateId::GenerateBook => format!("{BOOK_PREAMBLE}{GENERATE_BOOK_TASK}"),
            TemplateId::UpdateBook => format!("{BOOK_PREAMBLE}{UPDATE_BOOK}"),
            TemplateId::JsonInstruction => JSON_INSTRUCTION.to_string(),
            TemplateId::TextInstruction => TEXT_INSTRUCTION.to_string(),
            TemplateId::FinalText => FINAL_TEXT.to_string(),
            TemplateId::MatchJudge => MATCH_JUDGE.to_string(),
            TemplateId::CoherenceJudge => format!("{COHERENCE_JUDGE_HEAD}{ERROR_DIMENSIONS}{COHERENCE_JUDGE_TAIL}"),
        }
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for piece in scan(&self.body()) {
            if let Piece::Slot(name) = piece {
                if !names.iter().any(|n| n == name) {
                    names.push(name.to_string());
                }
            }
        }
        names
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template `{template}` needs a binding for `{name}`")]
    MissingPlaceholder { template: TemplateId, name: String },
}

/// Named values bound into a template.
pub type Bindings = BTreeMap<String, String>;

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn scan(body: &str) -> Vec<Piece<'_>> {
    let bytes = body.as_bytes();
    let mut pieces = Vec::new();
    let mut last = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                pieces.push(Piece::Text(&body[last..i]));
                pieces.push(Piece::Slot(&body[i + 1..j]));
                last = j + 1;
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    pieces.push(Piece::Text(&body[last..]));
    pieces
}

pub fn render_prompt(template: TemplateId, bindings: &Bindings) -> Result<String, TemplateError> {
    let body = template.body();
    let mut out = String::with_capacity(body.len());
    for piece in scan(&body) {
        match piece {
            Piece::Text(text) => out.push_str(text),
            Piece::Slot(name) => match bindings.get(name) {
                Some(value) => out.push_str(value),
                None => {
                    return Err(TemplateError::MissingPlaceholder {
                        template,
                        name: name.to_string(),
                    })
                }
            },
        }
    }
    Ok(out)
}

/// Convenience for building bindings inline.
pub fn bindings<const N: usize>(pairs: [(&str, String); N]) -> Bindings {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

const GENERATE_ENTITY_JSON_EXAMPLE: &str = r#"Summary JSON:
{
  "Room Quality": ["Spacious and comfortable rooms"],
  "Amenities": ["There are two pools"],
  "Service": ["Friendly staff", "overshadowed by unhelpful staff"],
  "Location": ["Beautiful beachfront view"],
  "Food & Beverage": ["Exceptional dining experience", "limited breakfast options"],
  "Noise Level": ["Notable street noise at night"]
}"#;

const GENERATE_ENTITY_TEXT_EXAMPLE: &str = "Summary Text:
HOTEL0 has spacious and comfortable rooms, and there are two pools. The staff are friendly, although this is overshadowed by unhelpful staff. The hotel has a beautiful beachfront view. It offers an exceptional dining experience but limited breakfast options. There is notable street noise at night.";

const PROCEED_GENERATE_JSON: &str = "Proceed to generate the summary Json.";

const GENERATE_ENTITY: &str = r#"Task Overview:
Your task involves synthesizing information from detailed descriptive paragraphs about a specific entity into a summary table.
This Json will highlight key attributes of the entity along with their detailed descriptions derived from the given texts.

Instructions:
* Extract Descriptive Values: Focus on extracting specific, detailed information rather than general or vague adjectives like "good" or "bad." Ensure that descriptions are precise and informative.
* Present a Balanced View: The table should reflect a balanced perspective, including positive, negative, and neutral attributes. For attributes with mixed reviews, indicate the sources supporting each viewpoint.
* Attribute Selection:
 - Commonly Interested Attributes: Include attributes that are generally of interest for the type of entity being described.
 - Unique Attributes: Also identify and include unique attributes that are specifically mentioned in the provided descriptions.
* Do not include irrelevant sentences about the given entity in the summary. Irrelevant sentences include entity names (HOTEL1, HUMAN) that are different from the given entity (HOTEL0).

Structure of the Summary Table:
* The Json should contain a dictionary format data, where keys are attributes and values are detailed descriptions of their corresponding attributes.
* List attributes with their corresponding values, indicating the source paragraph and relevant excerpts for substantiation.
* If an attribute has multiple values, include all values as a list of the attribute.
* Each value should contain sufficient evidence extracted from the paragraph related to the entity.

Example:
Entity: HOTEL0

Paragraphs:
P1. Great room and service, but breakfast was lacking. We loved the spacious room and friendly staff, but the breakfast options were limited. There are two pools.
P2. Poor customer service overshadowed the beautiful location. The beachfront view was amazing, but dealing with unhelpful staff was frustrating. Room is comfortable.
P3. Exceptional dining and comfortable beds, but noisy at night. The restaurant was five-star, and the beds were very cozy, but there was a lot of street noise.
P4. HOTEL1 offers great room service and breakfast was amazing. (Irrelevant sentence for the given entity "HOTEL0")
P5. HUMAN's creativity looks like a great room service offered by the hotel. (Irrelevant sentence for the given entity "HOTEL0")


Summary JSON:
{
  "Room Quality": ["Spacious and comfortable rooms"],
  "Amenities": ["There are two pools"],
  "Service": ["Friendly staff", "overshadowed by unhelpful staff"],
  "Location": ["Beautiful beachfront view"],
  "Food & Beverage": ["Exceptional dining experience", "limited breakfast options"],
  "Noise Level": ["Notable street noise at night"]
}

Your Task:
Generate a similar table based on the following descriptions of the specified entity.
Entity: {entity_name}

Paragraphs:
{paragraph}

Proceed to generate the summary Json."#;

const UPDATE_ENTITY_JSON_EXAMPLE: &str = r#"Given Existing Summary Table:
{
  "Room Quality": ["Spacious and comfortable rooms"],
  "Amenities": ["two pools"],
  "Service": ["Friendly staff", "overshadowed by unhelpful staff"],
}

Updated Summary Json:
{
  "Room Quality": ["Spacious and comfortable rooms", "Impeccably designed", "luxurious furnishings"],
  "Amenities": ["Two pools"],
  "Service": ["Friendly staff", "overshadowed by unhelpful staff"],
  "Food & Beverage": ["Exceptional dining experience", "limited breakfast options", "improved breakfast variety and quality"],
  "Lobby Design": ["Modern design"],
}"#;

const UPDATE_ENTITY_TEXT_EXAMPLE: &str = "Given Existing Summary:
Hotel0 has spacious and comfortable rooms and two pools. The staff are friendly, although this is overshadowed by unhelpful staff.

Updated Summary:
Hotel0 has spacious and comfortable rooms that are impeccably designed with luxurious furnishings, and two pools. The staff are friendly, although this is overshadowed by unhelpful staff. It offers an exceptional dining experience; breakfast options were limited but guests noted improved breakfast variety and quality. The lobby has a modern design.";

const UPDATE_ENTITY: &str = r#"Task Overview:
You are tasked with refining and expanding an existing summary table based on new descriptive paragraphs about an entity.
This involves updating the table to include new information, modify existing details without removing any, and ensuring all entries are supported by evidence from the text.

Instructions:
* Update Descriptive Values: Carefully read the new paragraph(s) and identify any information that should be added to the current table entries or modify them. Focus on specific, descriptive details, avoiding vague adjectives. **Do not remove any existing attributes or values**, but rather add to or revise them as necessary.
* Maintain a Balanced View: Ensure the updated table continues to present a balanced perspective, incorporating positive, negative, and neutral values. For any attribute with mixed evidence, update the count of sources supporting each view. All original attributes and values must be preserved in the table, with modifications only to reflect new insights or corrections based on the latest information.
* Attribute Revision and Addition:
 - Commonly Interested Attributes: Update or add attributes that are of general interest for the type of entity being described, based on the new information.
 - Unique Attributes: Identify and incorporate any unique attributes mentioned in the new paragraphs that were not previously included in the table.

Structure of the Updated Summary Table:
* Retain the two-column format: Attribute and Value.
* For each attribute, list the updated or new evidence indicating the source paragraph and relevant excerpts. Original attributes and values should remain listed, with additional information appended as necessary.
* If an attribute has multiple values, include all values as a list of the attribute.
* Each value should contain sufficient evidence extracted from the paragraph related to the entity.

Example
Entity: Hotel0
New Paragraph:
P4. The hotel has recently renovated its lobby, which now features a modern design.  Guests have also noted improvements in breakfast variety and quality.
P5. The hotel boasts impeccably designed rooms, featuring luxurious furnishings.

Given Existing Summary Table:
{
  "Room Quality": ["Spacious and comfortable rooms"],
  "Amenities": ["two pools"],
  "Service": ["Friendly staff", "overshadowed by unhelpful staff"],
}

Updated Summary Json:
{
  "Room Quality": ["Spacious and comfortable rooms", "Impeccably designed", "luxurious furnishings"],
  "Amenities": ["Two pools"],
  "Service": ["Friendly staff", "overshadowed by unhelpful staff"],
  "Food & Beverage": ["Exceptional dining experience", "limited breakfast options", "improved breakfast variety and quality"],
  "Lobby Design": ["Modern design"],
}

Your Task:
Update the summary Json with the given new descriptions of the specified entity.
Entity: {entity_name}
New Paragraph:
{paragraph}

Given Existing Summary Json:
{existing_summary}

Proceed to update the summary Json."#;

const REMOVE_DUPLICATES: &str = r#"Task Overview:
Your task involves removing duplicate information from a detailed summary json about a specific entity. This summary will highlight key attributes of the entity along with their detailed descriptions derived from the given texts.

Instructions:
1. Eliminate repetitive information to ensure the summary is concise.
2. In the given summary json, the keys are attributes of the entity and each attribute has its corresponding values.
3. If one attribute encompasses most of the details in another attribute, merge them together.
4. If one value encompasses most of the details in another value, merge them together.

Here is an example of merging attributes:

Given Existing Summary:
{
    "Views": ["beautiful views of the Eiffel tower"],
    "views from hotel": ["visible Eiffel tower"],
}

New Summary after removing duplicates and merging:
{
    "View": ["beautiful views of the Eiffel tower"]
}

===

Here is an example of merging values:

Given Existing Summary:
{
    "Views": ["beautiful views of the Eiffel tower", "view of the Eiffel tower"],
    "views from hotel": ["visible Eiffel tower"],
}

New Summary after removing duplicates and merging:
{
    "View": ["beautiful views of the Eiffel tower"]
}

==="#;

const DEDUP_TASK: &str = "

Given Existing Summary:
{existing_summary}

New Summary after removing duplicates and merging:
";

const COK_INTRO: &str = r#"I will provide a JSON format summary in a section called [NEW SUMMARY], and a class definition [CLASS], which define some fields that need to be generated, and an instantiation of that class under [PARTIAL SUMMARY] that is a response to the question in [QUESTION]. Your task is to propose updates to [PARTIAL SUMMARY] gathered from the information in [NEW SUMMARY].

There are two types of revisions that you can suggest: ADD and UPDATE.

For UPDATE, follow these instructions:
1. Your proposed updates must be for valid JSONPaths that already exist in [PARTIAL SUMMARY]. If the JSONPath does not exist, you should not propose an update for that JSONPath.
2. Updates can be made by modifying an existing value using content from [NEW SUMMARY].
3. Updates should never reduce the amount of information in [PARTIAL SUMMARY].
4. Never remove existing information from the [PARTIAL SUMMARY].
4. Proposed update must be a `dict[str, ProposedUpdate]` where the key is a valid JSONPath in [CLASS] and `ProposedUpdate` is defined as follows:
```
class ProposedUpdate(TypedDict):
  update: Any  # The type must be the same type as at the JSONPath in [CLASS].
```

For ADD, follow these instructions:
1. Proposed additions must be for valid JSONPaths that adhere to the definition in [CLASS]. They are allowed to increase the size of lists in the definition, but they must not define new fields which are not defined in the class definition.
2. It is OK to add partial objects. Leave fields unset if [NEW SUMMARY] does not contain a value for one of the fields in [PARTIAL SUMMARY].
3. Proposed additions must be a `dict[str, ProposedAdd]` where the key is a valid JSONPath in [CLASS] and `ProposedAdd` is defined as follows:
```
class ProposedAdd(TypedDict):
  add: Any  # The type must be the same type as at the JSONPath in [CLASS].
```

"#;

const COK_BOTH_ENTITY: &str = r#"For both operations, follow these instructions:
1. Values have sufficient context: the values of the [PARTIAL SUMMARY] should have enough context so a reader can understand what it means.
2. No redundant keys: If information from [NEW SUMMARY] can be incorporated by updating an existing key in [PARTIAL SUMMARY], then do not introduce a new redundant key.
3. No redundant values under the same key: If one value encompasses most of the details in another value, merge them together.
"#;

const COK_BOTH_BOOK: &str = r#"For both operations, follow these instructions:
1. Values have a short and concise information: the values of the [PARTIAL  SUMMARY] should have a short, concise, and summarized information.
2. No redundant keys: If information from [NEW  SUMMARY] can be incorporated by updating an existing key in [PARTIAL  SUMMARY], then do not introduce a new redundant key. For example, if there's already a field for 'activities' do not introduce a new key for 'other activities' or 'water activities', 'hiking'. Update the existing key for 'activities'.
3. No redundant values under the same key: If one value encompasses most of the details in another value, merge them together. For instance, "beautiful views of the Eiffel tower" and "view of the Eiffel tower" should be merged into a single value like "beautiful views of the Eiffel tower
4. Do not include trivial information or redundant information as a value for its corresponding key.
5. Content Focus: Values should highlight the most important information relevant to the main story.
6. Exclude Ancillary Content: Disregard sections that are not directly part of the main narrative, such as: Title, Acknowledgments, Dedication, Chapter titles, Glossary entries, Timelines, Forewords, Prologues, Epilogues, Appendices, Author notes.
"#;

const COK_EXAMPLE: &str = r#"

[QUESTION]
Merge the new summary and existing summary of HOTEL0.

[NEW SUMMARY]
{
  "attributes": {
    "Room Amenities": ["pub opens till midnight", "two large pools"],
    "Noise Level": ["Notable street noise at night"],
  }
}


[CLASS]
class Summary(TypedDict):
  attributes: dict[str, list[str]]  # Keyed by attribute, with a list of sufficient details about the attribute.

[PARTIAL SUMMARY]
{
  "attributes": {
    "Amenities": ["two pools"],
    "Food & Beverage": ["limited breakfast options"],
  }
}

[THOUGHTS FOR UPDATE]
1. I need to figure out which fields and values to update.
2. [PARTIAL SUMMARY] contains information about the following: ["Amenities", "Food & Beverage"]
3. [NEW SUMMARY] contains new content relevant to the following existing content: ["Amenities"]
4. The content should be updated at the following JSONPaths: ["$.'attributes'.'Amenities'"]

[UPDATED OBJECTS]
{
  "$.'attributes'.'Amenities'": {"update": [ "pub opens till midnight" ]}
}

[THOUGHTS FOR ADD]
1. I need to figure out which fields and values to add.
2. [NEW SUMMARY] mentions information about the following: ["Amenities", "Noise Level"]
3. [PARTIAL SUMMARY] does not yet have information about: [ "Noise Level" ]
3. The content should be added at the following JSONPaths: [ "$.'attributes'.'Noise Level'"]

[ADDED OBJECTS]
{
  "$.'attributes'.'Noise Level'": {"add": [ "Notable street noise at night" ]},
}"#;

const COK_TASK: &str = "

===

[QUESTION]
{question}

[NEW SUMMARY]
{new_summary}

[CLASS]
{class_text}

[PARTIAL SUMMARY]
{partial_summary}

[THOUGHTS FOR UPDATE]
";

const COMPRESS: &str = "Task Overview:
Your task involves compressing information from a detailed summary JSON about a book. This summary will highlight key details of the book that are important when summarizing the whole story of the book.

Instructions:
- Compress the summary to the specified number of tokens below.
- The condensed summary should retain key details about characters, events, backgrounds, motivations, objectives, and other important information.
- If the key has multiple values, merge them into a short summarized description.

Criteria:
- Redundancy: Eliminate repetitive information to ensure the summary is concise.
- Frequency: Emphasize the most frequently mentioned attributes or values, as they are likely the most important.
- Relevance: Focus on the information that is most pertinent to the main story of the book or the overall context of the summary.
- Remove trivial information that does not frequently appear in the other contexts or not relevant to the main story of the book based on the overall context of the summary.";

const COMPRESS_TASK: &str = "

Number of tokens: {token_budget}

Summary JSON:
{memory}

Compressed summary JSON:
";

const BOOK_PREAMBLE: &str = "Task Overview:
We are analyzing segments of a story sequentially to progressively build a comprehensive summary of the entire plot. Your task is to generate a new summary by integrating vital information from the current story segment with the existing summary stored in memory. The summary can be provided in either text format or JSON format.

Instructions:
1. Integrate Key Information: Incorporate new information related to key events, backgrounds, settings, characters, their objectives, and motivations from the current segment into the existing summary.
2. Introduction of New Elements: Briefly introduce any new characters, places, or major elements mentioned for the first time in the current segment if they are not already included in the memory.
3. Handling Non-Linear Narratives: Account for non-linear narratives, including flashbacks, and switches between alternate worlds or viewpoints, ensuring the summary maintains a consistent and chronological narrative.
4. Cohesive Summary: Create a summary that reads as though it was written in one go, despite the step-by-step process of updating it with each new segment.
5. Exclude Ancillary Content: Disregard sections that are not directly part of the main narrative, such as: Title, Acknowledgments, Dedication, Chapter titles, Glossary entries, Timelines, Forewords, Prologues, Epilogues, Appendices, Author notes.

{special_instruction}

";

const GENERATE_BOOK_TASK: &str = "Your Task:
Generate a summary based on the following segment from a story and the memory of the story up until this point. Ensure the output follows the specified format.

A segment from a story:

---

{book_chunk}

---

Generated summary in {output_format}:
";

const UPDATE_BOOK: &str = "Your Task:
Generate a summary based on the following segment from a story and the memory of the story up until this point. Ensure the output follows the specified format.

A segment from a story:

---

{book_chunk}

---

A memory of the story up until this point:

---

{memory}

---

Output Type: {output_format}

Updated summary in {output_format}:
";

const JSON_INSTRUCTION: &str = r#"Structure of the JSON Summary:
- Fields to Generate: Characters, Events, Backgrounds, Motivations, Objectives, Other.
- Field Format: Each field should be a dictionary where keys are the names of elements and values are their short descriptions.
- Each key should include a short and concise information as values that explain the key.
- Content Focus: Values should highlight the most important information relevant to the main story.
- Do not include trivial information or redundant information as a value for its corresponding key.

Here is an example of the JSON Summary:
{
  "characters": {
    "a character's name": [a list of short and summarized descriptions]
  },
  "events": {
    "an event's name": [a list of short and summarized descriptions]
  },
  "objectives": {
    "an objective's name": [a list of short and summarized descriptions]
  },
  "motivations": {
    "a motivation's name": [a list of short and summarized descriptions]
  },
  "background": {
    "a background's name": [a list of short and summarized descriptions]
  },
  "other": {
    "other information's name": [a list of short and summarized descriptions]
  }
}"#;

const TEXT_INSTRUCTION: &str = "Structure of the Text Summary:
- Key Elements to Include: Incorporate key events, characters, backgrounds, motivations, objectives, and other relevant details.
- Narrative Flow: Ensure the summary flows seamlessly as a cohesive and comprehensive narrative.

Here is an example of the Text Summary format:
A summary that reads as though it was written in one go. It can consist of multiple paragraphs.";

const FINAL_TEXT: &str = "Task Overview:
Convert the structured summary JSON below into a plain-text summary. Keep every key and value that appears in the JSON and write complete sentences.

Summary JSON:
{memory}

Plain-text summary:
";

const MATCH_JUDGE: &str = r#"Task Overview:
You are evaluating an entity summary against reference attribute-value pairs. Decide whether the predicted pair states the same information as one of the reference pairs.

Predicted pair:
{predicted}

Reference pairs:
{candidates}

Answer with a JSON object {"match": N} where N is the number of the matching reference pair, or {"match": null} if none of them match."#;

const COHERENCE_JUDGE_HEAD: &str = "Task Overview:
You are checking one sentence of a book summary for coherence errors. Read the whole summary, then decide whether the given sentence has any of the following errors:

";

/// Definitions of the eight coherence error dimensions.
pub const ERROR_DIMENSIONS: &str = "- Entity omission: an entity, real or abstract (person, object, place, concept, etc.) is mentioned, but key details are missing or unclear
- Event omission: an event is mentioned, but key details are missing or unclear
- Causal omission: the reason or motivation for something is missing or unclear
- Salience: inclusion of trivial details that do not contribute to the main storyline
- Discontinuity: an interruption in the flow of the narrative, including but not restricted to: sudden jumps between perspectives, time periods, or settings; poor transition between sentences or paragraphs; sentences or paragraphs that seem out of place; illogical sentence order or summary structure
- Duplication: redundant repetition of similar information
- Inconsistency: two parts of the summary contain contradicting information
- Language: grammar issues; confusing wording or phrasing; etc.";

const COHERENCE_JUDGE_TAIL: &str = r#"

Summary:
{summary}

Sentence:
{sentence}

Answer with a JSON object {"confusing": true or false, "dimensions": [names of the errors found]}."#;
