use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

fn cassette(name: &str) -> String {
    format!("scripted:{}", fixture(&format!("cassettes/{name}")))
}

fn chainkey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainkey"))
        .args(args)
        .env_remove("CHAINKEY_API_TOKEN")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = chainkey(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn hotel0_run(dir: &Path, strategy: &str) -> PathBuf {
    let out = dir.join(format!("{strategy}.json"));
    ok(&[
        "summarize", "--task", "entity", "--strategy", strategy,
        "--backend", &cassette("hotel0.jsonl"),
        "--in", &fixture("hotel0.json"),
        "--out", out.to_str().unwrap(), "--deterministic",
    ]);
    out
}

#[test]
fn summarize_cok_replays_seven_turns() {
    let dir = tempfile::tempdir().unwrap();
    let run = read_json(&hotel0_run(dir.path(), "cok_json"));
    let turns = run["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 7);
    for turn in &turns[1..] {
        assert!(turn["patch_outcome"]["result_valid"].as_bool().unwrap());
    }
    assert_eq!(run["config"]["strategy"], "cok_json");
    assert!(run.get("generated_at_unix").is_none());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for strategy in ["go_text", "gu_json", "gm_json", "cok_json"] {
        let first = std::fs::read(hotel0_run(a.path(), strategy)).unwrap();
        let second = std::fs::read(hotel0_run(b.path(), strategy)).unwrap();
        assert_eq!(first, second, "{strategy}");
    }
}

#[test]
fn timestamp_present_unless_deterministic() {
    let out = ok(&[
        "summarize", "--strategy", "go_json",
        "--backend", &cassette("hotel0.jsonl"),
        "--in", &fixture("hotel0.json"),
    ]);
    let run: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(run["generated_at_unix"].as_u64().unwrap() > 0);
}

#[test]
fn all_strategies_write_one_file_each() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "summarize", "--strategy", "all",
        "--backend", &cassette("hotel0.jsonl"),
        "--in", &fixture("hotel0.json"),
        "--out", dir.path().to_str().unwrap(), "--deterministic",
    ]);
    for name in ["go_text", "go_json", "gu_text", "gu_json", "gm_json", "cok_json"] {
        assert!(dir.path().join(format!("{name}.json")).is_file(), "{name}");
    }
}

#[test]
fn budgeted_book_run_stays_under_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("book.json");
    ok(&[
        "summarize", "--task", "book", "--strategy", "cok_json",
        "--chunk-limit", "100", "--token-budget", "200", "--final-format", "text",
        "--backend", &cassette("lighthouse.jsonl"),
        "--in", &fixture("lighthouse.txt"),
        "--out", out.to_str().unwrap(), "--deterministic",
    ]);
    let run = read_json(&out);
    let turns = run["turns"].as_array().unwrap();
    assert!(turns.len() > 1);
    for turn in turns {
        assert!(turn["memory_tokens"].as_u64().unwrap() <= 200, "{turn}");
    }
    assert!(run["final_summary"].is_string());
    assert_eq!(run["subject"], "lighthouse");
}

#[test]
fn missing_cassette_is_a_config_error() {
    let out = chainkey(&[
        "summarize", "--strategy", "cok_json",
        "--backend", "scripted:/nonexistent/cassette.jsonl",
        "--in", &fixture("hotel0.json"),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

#[test]
fn unrecorded_prompt_is_a_cassette_miss() {
    let dir = tempfile::tempdir().unwrap();
    let record: Value = read_json(&fixtures().join("hotel0.json"));
    let mut changed = record.clone();
    changed["paragraphs"][3] = Value::String("A paragraph nobody recorded.".into());
    let input = dir.path().join("changed.json");
    std::fs::write(&input, changed.to_string()).unwrap();
    let out = chainkey(&[
        "summarize", "--strategy", "cok_json",
        "--backend", &cassette("hotel0.jsonl"),
        "--in", input.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 5, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_flags_are_config_errors() {
    let text_as_json = chainkey(&[
        "summarize", "--strategy", "gu_text", "--final-format", "json",
        "--backend", &cassette("hotel0.jsonl"),
        "--in", &fixture("hotel0.json"),
    ]);
    assert_eq!(code(&text_as_json), 2);
    let unknown = chainkey(&[
        "summarize", "--strategy", "gx_json",
        "--backend", &cassette("hotel0.jsonl"),
        "--in", &fixture("hotel0.json"),
    ]);
    assert_eq!(code(&unknown), 2);
    let missing_input = chainkey(&[
        "summarize", "--strategy", "go_json",
        "--backend", &cassette("hotel0.jsonl"),
        "--in", "/nonexistent/record.json",
    ]);
    assert_eq!(code(&missing_input), 3);
}

#[test]
fn bench_two_strategies_gives_two_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let csv = dir.path().join("table.csv");
    let out = ok(&[
        "bench", "--in", &fixture("hotels.jsonl"),
        "--strategies", "gu_json,cok_json", "--matcher", "exact",
        "--backend", &cassette("hotels.jsonl"),
        "--out", report_path.to_str().unwrap(),
        "--csv", csv.to_str().unwrap(), "--deterministic", "--jobs", "3",
    ]);
    let report = read_json(&report_path);
    let blocks = report["strategies"].as_array().unwrap();
    assert_eq!(blocks.len(), 2);
    assert_eq!(blocks[0]["strategy"], "GU_json");
    assert_eq!(blocks[1]["entities"].as_array().unwrap().len(), 3);
    let rows = report["table"]["rows"].as_array().unwrap();
    let stages: Vec<&str> = rows.iter().map(|r| r["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["start", "last", "avg", "start", "last", "avg"]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("| CoK_json | Avg |"), "{table}");
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 7);
}

#[test]
fn bench_all_gives_six_blocks_in_any_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for jobs in ["1", "4"] {
        let path = dir.path().join(format!("report{jobs}.json"));
        ok(&[
            "bench", "--in", &fixture("hotels.jsonl"), "--strategies", "all",
            "--backend", &cassette("hotels.jsonl"),
            "--out", path.to_str().unwrap(), "--deterministic", "--jobs", jobs,
        ]);
        reports.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let report: Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(report["strategies"].as_array().unwrap().len(), 6);
}

#[test]
fn bench_rejects_mismatched_gold() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.jsonl");
    std::fs::write(
        &data,
        r#"{"entity":"HOTEL9","paragraphs":["a","b","c"],"gold_per_turn":[{"A":["x"]}]}"#,
    )
    .unwrap();
    let out = chainkey(&[
        "bench", "--in", data.to_str().unwrap(), "--strategies", "gu_json",
        "--backend", &cassette("hotels.jsonl"),
    ]);
    assert_eq!(code(&out), 8);
    assert!(String::from_utf8_lossy(&out.stderr).contains("HOTEL9"));
}

#[test]
fn eval_entity_run_against_gold() {
    let dir = tempfile::tempdir().unwrap();
    let run = hotel0_run(dir.path(), "gu_json");
    let out_path = dir.path().join("eval.json");
    let out = ok(&[
        "eval", "--run", run.to_str().unwrap(), "--gold", &fixture("hotels.jsonl"),
        "--matcher", "exact", "--out", out_path.to_str().unwrap(), "--deterministic",
    ]);
    let evaluation = read_json(&out_path);
    assert_eq!(evaluation["per_turn"].as_array().unwrap().len(), 7);
    assert_eq!(evaluation["aggregate"]["last"]["f1"], 1.0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("| Avg |"));
}

#[test]
fn eval_book_run_with_scripted_evaluator() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("book.json");
    ok(&[
        "summarize", "--task", "book", "--strategy", "gu_json",
        "--chunk-limit", "100", "--token-budget", "200", "--final-format", "text",
        "--backend", &cassette("lighthouse.jsonl"),
        "--in", &fixture("lighthouse.txt"),
        "--out", run.to_str().unwrap(), "--deterministic",
    ]);
    let out_path = dir.path().join("coherence.json");
    ok(&[
        "eval", "--run", run.to_str().unwrap(),
        "--backend", &cassette("lighthouse_judge.jsonl"),
        "--out", out_path.to_str().unwrap(), "--deterministic",
    ]);
    let report = read_json(&out_path);
    let score = report["coherence"]["coherence_score"].as_f64().unwrap();
    let ratio = report["coherence"]["confusion_ratio"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&score));
    assert!((score - (1.0 - ratio)).abs() < 1e-12);

    let no_backend = chainkey(&["eval", "--run", run.to_str().unwrap()]);
    assert_eq!(code(&no_backend), 2);
}

#[test]
fn chunk_reassembles_input() {
    let out = ok(&["chunk", "--in", &fixture("lighthouse.txt"), "--limit", "100"]);
    let chunks: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert!(chunks.len() > 1);
    let joined: String = chunks.iter().map(|c| c["text"].as_str().unwrap()).collect();
    assert_eq!(joined, std::fs::read_to_string(fixtures().join("lighthouse.txt")).unwrap());
    for c in &chunks {
        assert!(c["token_count"].as_u64().unwrap() <= 100);
    }
}

fn sorted_lines(path: &Path) -> Vec<String> {
    let mut lines: Vec<String> = std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    lines.sort();
    lines
}

/// The shipped cassettes must match what the synthetic backend answers now.
#[test]
fn shipped_cassettes_have_not_drifted() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new("bash")
        .arg(fixtures().join("regenerate.sh"))
        .arg(dir.path())
        .env("CHAINKEY", env!("CARGO_BIN_EXE_chainkey"))
        .status()
        .expect("bash runs");
    assert!(status.success());
    for name in ["hotel0.jsonl", "hotels.jsonl", "lighthouse.jsonl", "lighthouse_judge.jsonl"] {
        assert_eq!(
            sorted_lines(&dir.path().join(name)),
            sorted_lines(&fixtures().join("cassettes").join(name)),
            "{name} drifted; rerun fixtures/regenerate.sh"
        );
    }
}
