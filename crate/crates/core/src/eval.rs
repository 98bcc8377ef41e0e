//! Scoring summaries: attribute/value precision, recall and F1 against gold
//! pairs, and sentence-level coherence judged per error dimension.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::EntityStreamRecord;
use crate::doc::{leaf_strings, parse_text_summary, SummaryDoc};
use crate::llm::{bindings, extract_json, render_prompt, LlmBackend, LlmError, LlmRequest, TemplateId};
use crate::pipeline::{RunResult, Snapshot};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttrValuePair {
    pub attribute: String,
    pub value: String,
}

impl AttrValuePair {
    /// `None` when either side is blank.
    pub fn new(attribute: impl Into<String>, value: impl Into<String>) -> Option<Self> {
        let attribute = attribute.into().trim().to_string();
        let value = value.into().trim().to_string();
        (!attribute.is_empty() && !value.is_empty()).then_some(AttrValuePair { attribute, value })
    }
}

impl fmt::Display for AttrValuePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.attribute, self.value)
    }
}

/// Pairs from a structured summary. The attribute is the key path below the
/// top-level field, joined with ` / `.
pub fn pairs_from_doc(doc: &SummaryDoc) -> Vec<AttrValuePair> {
    leaf_strings(doc)
        .into_iter()
        .filter_map(|(path, value)| {
            let attribute = if path.len() > 1 { path[1..].join(" / ") } else { path.join(" / ") };
            AttrValuePair::new(attribute, value)
        })
        .collect()
}

/// Pairs from `Key: v1; v2` lines in a text summary.
pub fn pairs_from_text(text: &str) -> Vec<AttrValuePair> {
    parse_text_summary(text)
        .into_iter()
        .flat_map(|(key, values)| {
            values
                .into_iter()
                .filter_map(move |v| AttrValuePair::new(key.clone(), v))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatcherKind {
    Exact,
    Fuzzy,
    Llm,
}

impl FromStr for MatcherKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(MatcherKind::Exact),
            "fuzzy" => Ok(MatcherKind::Fuzzy),
            "llm" => Ok(MatcherKind::Llm),
            other => Err(format!("unknown matcher `{other}` (expected exact, fuzzy or llm)")),
        }
    }
}

pub enum Matcher<'a> {
    /// Equal after lowercasing and collapsing whitespace.
    Exact,
    /// Token Jaccard of at least 0.5 on both attribute and value.
    Fuzzy,
    /// The model picks the matching gold pair.
    Llm { backend: &'a dyn LlmBackend, temperature: f64 },
}

pub const FUZZY_THRESHOLD: f64 = 0.5;

pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn tokens(text: &str) -> Vec<String> {
    let mut out: Vec<String> = text
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    out.sort();
    out.dedup();
    out
}

pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let (a, b) = (tokens(a), tokens(b));
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let shared = a.iter().filter(|t| b.binary_search(t).is_ok()).count();
    shared as f64 / (a.len() + b.len() - shared) as f64
}

fn score(matcher: &Matcher<'_>, pred: &AttrValuePair, gold: &AttrValuePair) -> Option<f64> {
    match matcher {
        Matcher::Exact => (normalize(&pred.attribute) == normalize(&gold.attribute)
            && normalize(&pred.value) == normalize(&gold.value))
        .then_some(1.0),
        Matcher::Fuzzy => {
            let attr = token_jaccard(&pred.attribute, &gold.attribute);
            let value = token_jaccard(&pred.value, &gold.value);
            (attr >= FUZZY_THRESHOLD && value >= FUZZY_THRESHOLD).then_some(attr + value)
        }
        Matcher::Llm { .. } => None,
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub matched: Vec<(AttrValuePair, AttrValuePair)>,
    pub unmatched_pred: Vec<AttrValuePair>,
    pub unmatched_gold: Vec<AttrValuePair>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot aggregate an empty series")]
    EmptySeries,
    #[error("cannot split empty text into sentences")]
    EmptyText,
    #[error("evaluator call failed: {0}")]
    Llm(#[from] LlmError),
    #[error("unusable `{template}` verdict after re-ask: {message}")]
    Verdict { template: TemplateId, message: String },
    #[error("no gold summary for `{subject}` turn {turn}")]
    NoGold { subject: String, turn: usize },
}

/// Greedy one-to-one matching: predictions in order, each taking the best
/// still-unmatched gold pair (earliest on ties).
pub fn match_pairs(
    pred: &[AttrValuePair],
    gold: &[AttrValuePair],
    matcher: &Matcher<'_>,
) -> Result<MatchResult, EvalError> {
    let mut taken = vec![false; gold.len()];
    let mut result = MatchResult::default();
    for (index, p) in pred.iter().enumerate() {
        let choice = match matcher {
            Matcher::Llm { backend, temperature } => {
                let open: Vec<usize> = (0..gold.len()).filter(|&g| !taken[g]).collect();
                llm_choice(*backend, *temperature, index, p, gold, &open)?
            }
            _ => {
                let mut best: Option<(usize, f64)> = None;
                for (g, candidate) in gold.iter().enumerate() {
                    if taken[g] {
                        continue;
                    }
                    if let Some(s) = score(matcher, p, candidate) {
                        if best.is_none_or(|(_, b)| s > b) {
                            best = Some((g, s));
                        }
                    }
                }
                best.map(|(g, _)| g)
            }
        };
        match choice {
            Some(g) => {
                taken[g] = true;
                result.matched.push((p.clone(), gold[g].clone()));
            }
            None => result.unmatched_pred.push(p.clone()),
        }
    }
    result.unmatched_gold = gold
        .iter()
        .zip(&taken)
        .filter(|(_, t)| !**t)
        .map(|(g, _)| g.clone())
        .collect();
    Ok(result)
}

fn llm_choice(
    backend: &dyn LlmBackend,
    temperature: f64,
    index: usize,
    pred: &AttrValuePair,
    gold: &[AttrValuePair],
    open: &[usize],
) -> Result<Option<usize>, EvalError> {
    if open.is_empty() {
        return Ok(None);
    }
    let candidates = open
        .iter()
        .enumerate()
        .map(|(n, &g)| format!("{}. {}", n + 1, gold[g]))
        .collect::<Vec<_>>()
        .join("\n");
    let prompt = render_prompt(
        TemplateId::MatchJudge,
        &bindings([("predicted", pred.to_string()), ("candidates", candidates)]),
    )
    .expect("match-judge bindings are complete");
    let mut problem = String::new();
    for attempt in 0..2 {
        let request = LlmRequest::new(TemplateId::MatchJudge, index, prompt.clone())
            .with_temperature(temperature)?
            .with_attempt(attempt);
        let reply = backend.complete(&request)?.text;
        match extract_json(&reply).map_err(|e| e.to_string()).and_then(|v| {
            match v.get("match") {
                Some(Value::Null) => Ok(None),
                Some(Value::Number(n)) => match n.as_u64() {
                    Some(k) if (1..=open.len() as u64).contains(&k) => Ok(Some(open[k as usize - 1])),
                    _ => Err(format!("match number {n} out of range")),
                },
                _ => Err("reply lacks a `match` member".to_string()),
            }
        }) {
            Ok(choice) => return Ok(choice),
            Err(p) => problem = p,
        }
    }
    Err(EvalError::Verdict {
        template: TemplateId::MatchJudge,
        message: problem,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EntityMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EntityMetrics {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        EntityMetrics { precision, recall, f1 }
    }
}

/// P and R default to 0 when their denominator is empty.
pub fn compute_prf(result: &MatchResult) -> EntityMetrics {
    let hits = result.matched.len() as f64;
    let ratio = |others: usize| {
        let total = hits + others as f64;
        if total == 0.0 { 0.0 } else { hits / total }
    };
    EntityMetrics::from_pr(ratio(result.unmatched_pred.len()), ratio(result.unmatched_gold.len()))
}

/// Per-metric arithmetic mean. F1 is averaged, not recomputed (macro F1).
pub fn mean_metrics(series: &[EntityMetrics]) -> Result<EntityMetrics, EvalError> {
    if series.is_empty() {
        return Err(EvalError::EmptySeries);
    }
    let n = series.len() as f64;
    let sum = |f: fn(&EntityMetrics) -> f64| series.iter().map(f).sum::<f64>() / n;
    Ok(EntityMetrics {
        precision: sum(|m| m.precision),
        recall: sum(|m| m.recall),
        f1: sum(|m| m.f1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnAggregate {
    pub start: EntityMetrics,
    pub last: EntityMetrics,
    pub avg: EntityMetrics,
}

pub fn aggregate_turns(series: &[EntityMetrics]) -> Result<TurnAggregate, EvalError> {
    let avg = mean_metrics(series)?;
    Ok(TurnAggregate {
        start: series[0],
        last: series[series.len() - 1],
        avg,
    })
}

const ABBREVIATIONS: [&str; 12] = [
    "mr.", "mrs.", "ms.", "dr.", "st.", "jr.", "sr.", "prof.", "etc.", "e.g.", "i.e.", "vs.",
];

fn guarded(word: &str) -> bool {
    let word = word.trim_start_matches(|c: char| "\"'([".contains(c));
    let lower = word.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    let mut chars = word.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_alphabetic())
}

/// Splits on `.`, `!` or `?` followed by whitespace, and on line breaks.
/// A period ending a single-letter initial or a common abbreviation does not
/// end a sentence.
pub fn split_sentences(text: &str) -> Result<Vec<String>, EvalError> {
    let mut sentences = Vec::new();
    for line in text.lines() {
        let mut start = 0;
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        for (i, &(at, c)) in chars.iter().enumerate() {
            if !matches!(c, '.' | '!' | '?') {
                continue;
            }
            let mut end = at + c.len_utf8();
            let mut j = i + 1;
            while let Some(&(pos, closer)) = chars.get(j) {
                if matches!(closer, '"' | '\'' | ')' | '\u{201d}') {
                    end = pos + closer.len_utf8();
                    j += 1;
                } else {
                    break;
                }
            }
            let followed_by_space = chars.get(j).is_none_or(|&(_, n)| n.is_whitespace());
            if !followed_by_space || end <= start {
                continue;
            }
            if c == '.' {
                let word = line[start..at + 1].split_whitespace().last().unwrap_or("");
                if guarded(word) {
                    continue;
                }
            }
            let sentence = line[start..end].trim();
            if !sentence.is_empty() {
                sentences.push(sentence.to_string());
            }
            start = end;
        }
        let rest = line[start..].trim();
        if !rest.is_empty() {
            sentences.push(rest.to_string());
        }
    }
    if sentences.is_empty() {
        return Err(EvalError::EmptyText);
    }
    Ok(sentences)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorDimension {
    EntityOmission,
    EventOmission,
    CausalOmission,
    Salience,
    Discontinuity,
    Duplication,
    Inconsistency,
    Language,
}

impl ErrorDimension {
    pub const ALL: [ErrorDimension; 8] = [
        ErrorDimension::EntityOmission,
        ErrorDimension::EventOmission,
        ErrorDimension::CausalOmission,
        ErrorDimension::Salience,
        ErrorDimension::Discontinuity,
        ErrorDimension::Duplication,
        ErrorDimension::Inconsistency,
        ErrorDimension::Language,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ErrorDimension::EntityOmission => "Entity omission",
            ErrorDimension::EventOmission => "Event omission",
            ErrorDimension::CausalOmission => "Causal omission",
            ErrorDimension::Salience => "Salience",
            ErrorDimension::Discontinuity => "Discontinuity",
            ErrorDimension::Duplication => "Duplication",
            ErrorDimension::Inconsistency => "Inconsistency",
            ErrorDimension::Language => "Language",
        }
    }

    /// Case-, space- and hyphen-insensitive lookup by label.
    pub fn from_label(text: &str) -> Option<Self> {
        let squash = |s: &str| s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        let wanted = squash(text);
        ErrorDimension::ALL.into_iter().find(|d| squash(d.label()) == wanted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceVerdict {
    pub text: String,
    pub confusing: bool,
    pub dimensions: Vec<ErrorDimension>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub sentences: Vec<SentenceVerdict>,
    pub confusion_ratio: f64,
    pub coherence_score: f64,
}

impl CoherenceReport {
    /// Panics on an empty verdict list.
    pub fn from_verdicts(sentences: Vec<SentenceVerdict>) -> Self {
        assert!(!sentences.is_empty(), "coherence needs at least one sentence");
        let confusing = sentences.iter().filter(|s| s.confusing).count();
        let confusion_ratio = confusing as f64 / sentences.len() as f64;
        CoherenceReport {
            sentences,
            confusion_ratio,
            coherence_score: 1.0 - confusion_ratio,
        }
    }

    pub fn confusing_count(&self) -> usize {
        self.sentences.iter().filter(|s| s.confusing).count()
    }
}

/// Asks the evaluator about each sentence with the whole summary as context.
/// Up to `jobs` sentences are judged concurrently; verdict order follows the
/// text.
pub fn coherence_eval(
    summary: &str,
    evaluator: &dyn LlmBackend,
    temperature: f64,
    jobs: usize,
) -> Result<CoherenceReport, EvalError> {
    let sentences = split_sentences(summary)?;
    let judge = |index: usize| judge_sentence(summary, &sentences[index], index, evaluator, temperature);
    let jobs = jobs.max(1).min(sentences.len());
    let verdicts: Vec<Result<SentenceVerdict, EvalError>> = if jobs == 1 {
        (0..sentences.len()).map(judge).collect()
    } else {
        let mut slots: Vec<Option<Result<SentenceVerdict, EvalError>>> = (0..sentences.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..jobs)
                .map(|worker| {
                    let judge = &judge;
                    let count = sentences.len();
                    scope.spawn(move || {
                        (worker..count)
                            .step_by(jobs)
                            .map(|i| (i, judge(i)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for handle in handles {
                for (i, verdict) in handle.join().expect("judge thread panicked") {
                    slots[i] = Some(verdict);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("every sentence judged")).collect()
    };
    let verdicts = verdicts.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(CoherenceReport::from_verdicts(verdicts))
}

fn judge_sentence(
    summary: &str,
    sentence: &str,
    index: usize,
    evaluator: &dyn LlmBackend,
    temperature: f64,
) -> Result<SentenceVerdict, EvalError> {
    let prompt = render_prompt(
        TemplateId::CoherenceJudge,
        &bindings([("summary", summary.to_string()), ("sentence", sentence.to_string())]),
    )
    .expect("coherence-judge bindings are complete");
    let mut problem = String::new();
    for attempt in 0..2 {
        let request = LlmRequest::new(TemplateId::CoherenceJudge, index, prompt.clone())
            .with_temperature(temperature)?
            .with_attempt(attempt);
        let reply = evaluator.complete(&request)?.text;
        let parsed = extract_json(&reply).map_err(|e| e.to_string()).and_then(|v| {
            let confusing = v
                .get("confusing")
                .and_then(Value::as_bool)
                .ok_or_else(|| "verdict lacks a boolean `confusing`".to_string())?;
            let dimensions = v
                .get("dimensions")
                .and_then(Value::as_array)
                .map(|labels| {
                    let mut found: Vec<ErrorDimension> = labels
                        .iter()
                        .filter_map(Value::as_str)
                        .filter_map(ErrorDimension::from_label)
                        .collect();
                    found.dedup();
                    found
                })
                .unwrap_or_default();
            Ok((confusing, dimensions))
        });
        match parsed {
            Ok((confusing, dimensions)) => {
                return Ok(SentenceVerdict {
                    text: sentence.to_string(),
                    confusing,
                    dimensions,
                })
            }
            Err(p) => problem = p,
        }
    }
    Err(EvalError::Verdict {
        template: TemplateId::CoherenceJudge,
        message: problem,
    })
}

pub fn snapshot_pairs(snapshot: &Snapshot) -> Vec<AttrValuePair> {
    match snapshot {
        Snapshot::Json(doc) => pairs_from_doc(doc),
        Snapshot::Text(text) => pairs_from_text(text),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvaluation {
    pub subject: String,
    pub strategy: String,
    pub per_turn: Vec<EntityMetrics>,
    pub aggregate: TurnAggregate,
}

/// Scores every turn snapshot against the record's gold for that turn. A
/// single-turn run over several paragraphs is scored against the final gold.
pub fn evaluate_run(
    result: &RunResult,
    record: &EntityStreamRecord,
    matcher: &Matcher<'_>,
) -> Result<RunEvaluation, EvalError> {
    let single_shot = result.turns.len() == 1 && record.paragraphs.len() > 1;
    let mut per_turn = Vec::with_capacity(result.turns.len());
    for turn in &result.turns {
        let gold = if single_shot { record.final_gold() } else { record.gold_at(turn.turn) };
        let gold = gold.ok_or_else(|| EvalError::NoGold {
            subject: record.entity.clone(),
            turn: turn.turn,
        })?;
        let matched = match_pairs(&snapshot_pairs(&turn.memory_snapshot), &pairs_from_doc(gold), matcher)?;
        per_turn.push(compute_prf(&matched));
    }
    Ok(RunEvaluation {
        subject: result.subject.clone(),
        strategy: result.config.strategy.label().to_string(),
        aggregate: aggregate_turns(&per_turn)?,
        per_turn,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Start,
    Last,
    Avg,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::Start => "start",
            Stage::Last => "last",
            Stage::Avg => "Avg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub strategy: String,
    pub stage: Stage,
    pub metrics: EntityMetrics,
}

/// Rows of strategy × {start, last, Avg}; columns P, R, F1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<TableRow>,
}

impl ResultsTable {
    /// `per_entity` holds each entity's turn aggregate for this strategy;
    /// the block reports their means.
    pub fn push_strategy(&mut self, strategy: &str, per_entity: &[TurnAggregate]) -> Result<(), EvalError> {
        let pick = |f: fn(&TurnAggregate) -> EntityMetrics| {
            mean_metrics(&per_entity.iter().map(f).collect::<Vec<_>>())
        };
        for (stage, metrics) in [
            (Stage::Start, pick(|a| a.start)?),
            (Stage::Last, pick(|a| a.last)?),
            (Stage::Avg, pick(|a| a.avg)?),
        ] {
            self.rows.push(TableRow {
                strategy: strategy.to_string(),
                stage,
                metrics,
            });
        }
        Ok(())
    }

    pub fn strategies(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for row in &self.rows {
            if !out.contains(&row.strategy.as_str()) {
                out.push(&row.strategy);
            }
        }
        out
    }

    /// Values in percent with one decimal.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Strategy | Stage | P | R | F1 |\n|---|---|---:|---:|---:|\n");
        for row in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {:.1} | {:.1} | {:.1} |\n",
                row.strategy,
                row.stage.label(),
                row.metrics.precision * 100.0,
                row.metrics.recall * 100.0,
                row.metrics.f1 * 100.0
            ));
        }
        out
    }

    /// Raw fractions, full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,stage,precision,recall,f1\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.strategy,
                row.stage.label(),
                row.metrics.precision,
                row.metrics.recall,
                row.metrics.f1
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::mock::SyntheticBackend;
    use crate::llm::FnBackend;
    use crate::schema::entity_schema;
    use serde_json::json;

    fn pair(a: &str, v: &str) -> AttrValuePair {
        AttrValuePair::new(a, v).unwrap()
    }

    #[test]
    fn exact_matching_examples() {
        let pred = [pair("A", "x"), pair("B", "q")];
        let gold = [pair("A", "x"), pair("C", "z")];
        let m = match_pairs(&pred, &gold, &Matcher::Exact).unwrap();
        assert_eq!((m.matched.len(), m.unmatched_pred.len(), m.unmatched_gold.len()), (1, 1, 1));
        let prf = compute_prf(&m);
        assert_eq!((prf.precision, prf.recall, prf.f1), (0.5, 0.5, 0.5));

        let all = match_pairs(&gold, &gold, &Matcher::Exact).unwrap();
        assert_eq!(all.matched.len(), 2);
        assert_eq!(compute_prf(&all), EntityMetrics { precision: 1.0, recall: 1.0, f1: 1.0 });

        let norm = match_pairs(&[pair("amenities", "Two  Pools")], &[pair("Amenities", "two pools")], &Matcher::Exact).unwrap();
        assert_eq!(norm.matched.len(), 1);
    }

    #[test]
    fn empty_sides_score_zero() {
        let m = match_pairs(&[], &[pair("A", "x")], &Matcher::Exact).unwrap();
        assert_eq!(compute_prf(&m), EntityMetrics::default());
        let m = match_pairs(&[pair("A", "x")], &[], &Matcher::Exact).unwrap();
        assert_eq!(compute_prf(&m), EntityMetrics::default());
    }

    #[test]
    fn fuzzy_needs_both_sides() {
        let gold = [pair("Pool area", "two large heated pools")];
        let close = match_pairs(&[pair("pool", "two heated pools")], &gold, &Matcher::Fuzzy).unwrap();
        assert_eq!(close.matched.len(), 1);
        let wrong_attr = match_pairs(&[pair("Spa", "two large heated pools")], &gold, &Matcher::Fuzzy).unwrap();
        assert!(wrong_attr.matched.is_empty());
    }

    #[test]
    fn fuzzy_prefers_best_candidate() {
        let gold = [pair("Pool", "two pools open late"), pair("Pool", "two pools")];
        let m = match_pairs(&[pair("pool", "two pools")], &gold, &Matcher::Fuzzy).unwrap();
        assert_eq!(m.matched[0].1, gold[1]);
    }

    #[test]
    fn llm_matcher_uses_the_judge() {
        let backend = SyntheticBackend::new(entity_schema(), vec![]);
        let matcher = Matcher::Llm { backend: &backend, temperature: 0.8 };
        let gold = [pair("Spa", "sauna"), pair("Pool", "two pools")];
        let m = match_pairs(&[pair("pool", "Two pools"), pair("Gym", "none")], &gold, &matcher).unwrap();
        assert_eq!(m.matched, vec![(pair("pool", "Two pools"), gold[1].clone())]);
        assert_eq!(m.unmatched_gold, vec![gold[0].clone()]);
    }

    #[test]
    fn llm_matcher_rejects_out_of_range_answers() {
        let backend = FnBackend::new("bad", |_: &LlmRequest| Ok(r#"{"match": 7}"#.to_string()));
        let matcher = Matcher::Llm { backend: &backend, temperature: 0.8 };
        assert!(matches!(
            match_pairs(&[pair("a", "b")], &[pair("a", "b")], &matcher),
            Err(EvalError::Verdict { .. })
        ));
    }

    #[test]
    fn aggregation() {
        let series = [EntityMetrics::from_pr(1.0, 1.0), EntityMetrics::from_pr(0.5, 0.5)];
        let agg = aggregate_turns(&series).unwrap();
        assert_eq!(agg.start.f1, 1.0);
        assert_eq!(agg.last.f1, 0.5);
        assert_eq!(agg.avg.f1, 0.75);
        let one = aggregate_turns(&series[..1]).unwrap();
        assert_eq!(one.start, one.last);
        assert_eq!(one.start, one.avg);
        assert!(matches!(aggregate_turns(&[]), Err(EvalError::EmptySeries)));
    }

    #[test]
    fn sentence_splitting() {
        assert_eq!(split_sentences("A. B went home. She slept.").unwrap(), ["A. B went home.", "She slept."]);
        assert_eq!(split_sentences("One sentence").unwrap(), ["One sentence"]);
        assert!(matches!(split_sentences(""), Err(EvalError::EmptyText)));
        assert!(matches!(split_sentences("  \n "), Err(EvalError::EmptyText)));
        assert_eq!(
            split_sentences("Dr. Who met Mr. Smith, etc. and left! Why? \"Fine.\" Done").unwrap(),
            ["Dr. Who met Mr. Smith, etc. and left!", "Why?", "\"Fine.\"", "Done"]
        );
        assert_eq!(split_sentences("Version 2.5 shipped.").unwrap(), ["Version 2.5 shipped."]);
        assert_eq!(split_sentences("Line one\nLine two").unwrap(), ["Line one", "Line two"]);
    }

    #[test]
    fn coherence_arithmetic() {
        let text = (0..10)
            .map(|i| if i % 3 == 0 && i > 0 { format!("Suddenly event {i}.") } else { format!("Event {i} happened.") })
            .collect::<Vec<_>>()
            .join(" ");
        let judge = SyntheticBackend::new(entity_schema(), vec![]).with_confusing_markers(vec!["suddenly".into()]);
        for jobs in [1, 4] {
            let report = coherence_eval(&text, &judge, 0.8, jobs).unwrap();
            assert_eq!(report.sentences.len(), 10);
            assert_eq!(report.confusing_count(), 3);
            assert!((report.confusion_ratio - 0.3).abs() < 1e-12);
            assert!((report.coherence_score - 0.7).abs() < 1e-12);
            assert_eq!(report.sentences[3].dimensions, [ErrorDimension::Discontinuity]);
            assert!(report.sentences[3].text.starts_with("Suddenly event 3"));
        }
        let clean = coherence_eval("All good. Still good.", &judge, 0.8, 1).unwrap();
        assert_eq!(clean.coherence_score, 1.0);
        assert!(matches!(coherence_eval("", &judge, 0.8, 1), Err(EvalError::EmptyText)));
    }

    #[test]
    fn dimension_labels() {
        assert_eq!(ErrorDimension::from_label("entity-omission"), Some(ErrorDimension::EntityOmission));
        assert_eq!(ErrorDimension::from_label("Causal Omission"), Some(ErrorDimension::CausalOmission));
        assert_eq!(ErrorDimension::from_label("grammar"), None);
        for d in ErrorDimension::ALL {
            assert!(crate::llm::ERROR_DIMENSIONS.contains(&format!("- {}:", d.label())));
        }
    }

    #[test]
    fn pairs_from_summaries() {
        let doc = json!({"attributes": {"Pool": ["two pools", "heated"], "Spa": []}});
        assert_eq!(pairs_from_doc(&doc), vec![pair("Pool", "two pools"), pair("Pool", "heated")]);
        assert_eq!(pairs_from_text("Pool: two pools; heated"), pairs_from_doc(&doc));
    }

    #[test]
    fn table_shapes() {
        let agg = aggregate_turns(&[EntityMetrics::from_pr(1.0, 0.5)]).unwrap();
        let mut table = ResultsTable::default();
        table.push_strategy("GU_json", &[agg, agg]).unwrap();
        table.push_strategy("CoK_json", &[agg]).unwrap();
        assert_eq!(table.rows.len(), 6);
        assert_eq!(table.strategies(), ["GU_json", "CoK_json"]);
        let md = table.to_markdown();
        assert!(md.contains("| CoK_json | Avg | 100.0 | 50.0 | 66.7 |"), "{md}");
        assert_eq!(table.to_csv().lines().count(), 7);
    }
}
