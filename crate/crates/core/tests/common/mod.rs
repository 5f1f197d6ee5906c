#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use toolplan_core::competition::{Competition, Layout};
use toolplan_core::harness::{prepare, run_trial, PolicyChoice, PreparedCompetition, TrialResult, TrialSettings};
use toolplan_core::llm::LlmConfig;
use toolplan_core::mock::{MockResponse, MockServer};
use toolplan_core::playbook::{golden_playbook, PlaybookSpec};
use toolplan_core::search::{Algorithm, SearchConfig};
use toolplan_core::trajlog::ClockKind;
use toolplan_core::Registry;

pub const LLM_COMPETITION: &str = "synthetic_spaceship";
pub const LLM_SEED: u64 = 0;

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn settings(out: &Path, algorithm: Algorithm, policy: PolicyChoice, search: SearchConfig) -> TrialSettings {
    TrialSettings {
        algorithm,
        policy,
        search,
        trials: 1,
        base_seed: 0,
        out_dir: out.to_path_buf(),
        data_dir: out.join("competition_data"),
        clock: ClockKind::Logical,
    }
}

pub fn prepared(name: &str, out: &Path) -> PreparedCompetition {
    prepare(Competition::find(name, None).unwrap(), out, &out.join("competition_data")).unwrap()
}

/// Canned chat-completion replies that walk the golden playbook one call at a time.
pub fn scripted_replies(p: &PreparedCompetition) -> Vec<String> {
    let spec = &p.competition.spec;
    let layout = &p.data.layout;
    let playbook = golden_playbook(&PlaybookSpec {
        train_path: layout.train.clone(),
        test_path: layout.test.clone(),
        submission_path: Layout::submission(&spec.name, Algorithm::React.as_str(), LLM_SEED),
        target: spec.target.clone(),
        id_column: spec.id_column.clone(),
        classification: spec.task.is_classification(),
        categorical: p.data.categorical.clone(),
    });
    playbook
        .iter()
        .enumerate()
        .map(|(i, call)| {
            let reply = json!({
                "id": format!("chatcmpl-{i}"),
                "object": "chat.completion",
                "model": "mock-model",
                "choices": [{
                    "index": 0,
                    "finish_reason": "tool_calls",
                    "message": {
                        "role": "assistant",
                        "content": format!("Step {}: calling {}.", i + 1, call.tool),
                        "tool_calls": [{
                            "id": format!("call_{i}"),
                            "type": "function",
                            "function": {"name": call.tool, "arguments": call.args_json().to_string()}
                        }]
                    }
                }],
                "usage": {"prompt_tokens": 1000 + 10 * i, "completion_tokens": 25, "total_tokens": 1025 + 10 * i}
            });
            serde_json::to_string_pretty(&reply).unwrap()
        })
        .collect()
}

pub struct LlmRun {
    pub requests: Vec<String>,
    pub replies: Vec<String>,
    pub result: TrialResult,
    pub log: Value,
}

/// ReAct with the LLM policy against the mock server.
pub fn llm_scenario(out: &Path) -> LlmRun {
    let p = prepared(LLM_COMPETITION, out);
    let replies = scripted_replies(&p);
    let server = MockServer::start(replies.iter().cloned().map(MockResponse::ok).collect()).unwrap();
    let cfg = LlmConfig { base_url: server.url(), model: "mock-model".into(), retries: 0, ..LlmConfig::default() };
    let s = settings(out, Algorithm::React, PolicyChoice::Llm(cfg), SearchConfig::default());
    let registry = Registry::with_catalog().unwrap();
    let result = run_trial(&p, &registry, &s, LLM_SEED).unwrap();
    let log = serde_json::from_str(&std::fs::read_to_string(out.join(&result.log)).unwrap()).unwrap();
    LlmRun { requests: server.requests(), replies, result, log }
}

/// Golden request bodies, one JSON document per line.
pub fn read_golden_requests() -> Vec<String> {
    std::fs::read_to_string(golden_dir().join("llm_requests.jsonl"))
        .expect("golden requests exist; regenerate with UPDATE_GOLDEN=1")
        .lines()
        .map(str::to_string)
        .collect()
}

pub fn read_golden_replies() -> Vec<String> {
    let text = std::fs::read_to_string(golden_dir().join("llm_replies.json")).expect("golden replies exist");
    serde_json::from_str::<Vec<Value>>(&text).unwrap().iter().map(|v| serde_json::to_string_pretty(v).unwrap()).collect()
}

pub fn write_golden(run: &LlmRun) {
    let dir = golden_dir();
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("llm_requests.jsonl"), run.requests.join("\n") + "\n").unwrap();
    let replies: Vec<Value> = run.replies.iter().map(|r| serde_json::from_str(r).unwrap()).collect();
    std::fs::write(dir.join("llm_replies.json"), serde_json::to_string_pretty(&replies).unwrap() + "\n").unwrap();
}
