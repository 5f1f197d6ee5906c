//! Trajectory logs: one JSON record per step of the reported trajectory.

use std::time::Instant;

use chrono::{Local, NaiveDate, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::message::{CallRecord, HumanKind, Message, Role};

pub const PREVIEW_CHARS: usize = 300;

pub const STEP_TYPES: [&str; 7] = [
    "tool_selection",
    "tool_execution_initiation",
    "tool_execution_completion",
    "tool_result",
    "reflection",
    "reward_feedback",
    "execution_summary",
];

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.6f";

/// First 300 characters, with an ellipsis when the text is longer.
pub fn preview(text: &str) -> String {
    match text.char_indices().nth(PREVIEW_CHARS) {
        Some((i, _)) => format!("{}...", &text[..i]),
        None => text.to_string(),
    }
}

/// Timestamps from the wall clock, or a deterministic tick per record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClockKind {
    Logical,
    Wall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub competition_name: String,
    pub algorithm: String,
    pub seed: u64,
    pub steps: Vec<Value>,
}

pub struct TrajectoryLogger {
    clock: ClockKind,
    start: Instant,
    ticks: i64,
    steps: Vec<Value>,
}

impl TrajectoryLogger {
    pub fn new(clock: ClockKind) -> TrajectoryLogger {
        TrajectoryLogger { clock, start: Instant::now(), ticks: 0, steps: Vec::new() }
    }

    fn logical_epoch() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2025, 1, 1).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid date")
    }

    fn timestamp(&mut self) -> String {
        self.ticks += 1;
        match self.clock {
            ClockKind::Logical => (Self::logical_epoch() + TimeDelta::milliseconds(self.ticks)).format(TIME_FORMAT).to_string(),
            ClockKind::Wall => Local::now().naive_local().format(TIME_FORMAT).to_string(),
        }
    }

    /// Seconds since the logger was created.
    pub fn elapsed(&self) -> f64 {
        match self.clock {
            ClockKind::Logical => self.ticks as f64 * 1e-3,
            ClockKind::Wall => self.start.elapsed().as_secs_f64(),
        }
    }

    fn push(&mut self, message_type: Option<&str>, step_type: &str, action: &str, fields: Value) {
        let mut rec = Map::new();
        rec.insert("step_number".into(), json!(self.steps.len() + 1));
        if let Some(mt) = message_type {
            rec.insert("message_type".into(), json!(mt));
        }
        rec.insert("timestamp".into(), json!(self.timestamp()));
        rec.insert("step_type".into(), json!(step_type));
        rec.insert("action".into(), json!(action));
        if let Value::Object(m) = fields {
            rec.extend(m);
        }
        self.steps.push(Value::Object(rec));
    }

    fn content_fields(content: &str) -> Value {
        json!({"content_preview": preview(content), "content_length": content.chars().count()})
    }

    /// Records for a path of messages from a tree search.
    pub fn tree_messages(&mut self, messages: &[Message]) {
        for m in messages {
            match (m.role, m.human_kind) {
                (Role::Ai, _) => {
                    let names: Vec<&str> = m.tool_calls.iter().map(|c| c.name.as_str()).collect();
                    let detail: Vec<Value> = m.tool_calls.iter().map(call_detail).collect();
                    self.push(
                        Some("AIMessage"),
                        "tool_selection",
                        "selected_tools_for_execution",
                        json!({"tools_selected": names, "tool_calls_detail": detail, "content": m.content}),
                    );
                }
                (Role::Tool, _) => {
                    self.push(Some("ToolMessage"), "tool_result", "received_tool_output", Self::content_fields(&m.content))
                }
                (Role::Human, Some(HumanKind::RewardFeedback)) => self.push(
                    Some("HumanMessage"),
                    "reward_feedback",
                    "generated_reward_feedback",
                    Self::content_fields(&m.content),
                ),
                (Role::Human, Some(HumanKind::Reflection)) => {
                    let mut f = Self::content_fields(&m.content);
                    f["extracted_score"] = json!(m.score);
                    f["full_reflection_content"] = json!(m.content);
                    self.push(Some("HumanMessage"), "reflection", "llm_reflection", f);
                }
                _ => {}
            }
        }
    }

    /// Records for a linear ReAct trajectory.
    pub fn react_messages(&mut self, messages: &[Message]) {
        for m in messages {
            match m.role {
                Role::Ai if !m.tool_calls.is_empty() => {
                    let tools: Vec<Value> = m
                        .tool_calls
                        .iter()
                        .map(|c| json!({"tool_name": c.name, "tool_args": c.args, "tool_id": c.id}))
                        .collect();
                    self.push(None, "tool_execution_initiation", "tool_execution_started", json!({"tools_to_execute": tools}));
                }
                Role::Tool => {
                    let mut r = Self::content_fields(&m.content);
                    r["message_type"] = json!("ToolMessage");
                    self.push(None, "tool_execution_completion", "tool_execution_completed", json!({"tool_results": [r]}));
                }
                _ => {}
            }
        }
    }

    pub fn finish(
        mut self,
        competition: &str,
        algorithm: &str,
        seed: u64,
        total_tokens: u64,
        total_cost: f64,
        final_message_count: usize,
    ) -> TrajectoryLog {
        let elapsed = self.elapsed();
        self.push(
            None,
            "execution_summary",
            "agent_execution_completed",
            json!({
                "total_execution_time": elapsed,
                "total_tokens": total_tokens,
                "total_cost": total_cost,
                "final_message_count": final_message_count,
                "competition_name": competition,
            }),
        );
        TrajectoryLog {
            competition_name: competition.to_string(),
            algorithm: algorithm.to_string(),
            seed,
            steps: self.steps,
        }
    }
}

fn call_detail(c: &CallRecord) -> Value {
    json!({"name": c.name, "args": c.args, "id": c.id, "type": "tool_call"})
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("log is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("step {index}: {problem}")]
    Step { index: usize, problem: String },
    #[error("{0}")]
    Shape(String),
}

fn require(rec: &Map<String, Value>, index: usize, field: &str, ok: fn(&Value) -> bool) -> Result<(), LogError> {
    match rec.get(field) {
        Some(v) if ok(v) => Ok(()),
        Some(v) => Err(LogError::Step { index, problem: format!("field '{field}' has the wrong type ({v})") }),
        None => Err(LogError::Step { index, problem: format!("missing field '{field}'") }),
    }
}

fn is_str(v: &Value) -> bool {
    v.is_string()
}
fn is_uint(v: &Value) -> bool {
    v.is_u64()
}
fn is_num(v: &Value) -> bool {
    v.is_number()
}
fn is_arr(v: &Value) -> bool {
    v.is_array()
}
fn is_score(v: &Value) -> bool {
    v.is_number() || v.is_null()
}

fn require_items(
    rec: &Map<String, Value>,
    index: usize,
    field: &str,
    checks: &[(&str, fn(&Value) -> bool)],
) -> Result<(), LogError> {
    require(rec, index, field, is_arr)?;
    for item in rec[field].as_array().into_iter().flatten() {
        let obj = item
            .as_object()
            .ok_or_else(|| LogError::Step { index, problem: format!("entries of '{field}' must be objects") })?;
        for (k, check) in checks {
            require(obj, index, k, *check).map_err(|e| match e {
                LogError::Step { problem, .. } => LogError::Step { index, problem: format!("{field}: {problem}") },
                other => other,
            })?;
        }
    }
    Ok(())
}

/// Check a log against the record schema. Unknown step types are reported
/// as warnings.
pub fn validate_log(log: &Value) -> Result<Vec<String>, LogError> {
    let steps = log
        .get("steps")
        .and_then(Value::as_array)
        .ok_or_else(|| LogError::Shape("log must be an object with a 'steps' array".into()))?;
    let mut warnings = Vec::new();
    for (index, step) in steps.iter().enumerate() {
        let rec = step
            .as_object()
            .ok_or_else(|| LogError::Step { index, problem: "record is not an object".into() })?;
        require(rec, index, "step_number", is_uint)?;
        require(rec, index, "timestamp", is_str)?;
        require(rec, index, "step_type", is_str)?;
        require(rec, index, "action", is_str)?;
        let content: &[(&str, fn(&Value) -> bool)] = &[("content_preview", is_str), ("content_length", is_uint)];
        match rec["step_type"].as_str().unwrap_or_default() {
            "tool_selection" => {
                require(rec, index, "message_type", is_str)?;
                require(rec, index, "tools_selected", is_arr)?;
                require(rec, index, "content", is_str)?;
                require_items(rec, index, "tool_calls_detail", &[("name", is_str), ("args", |_| true), ("id", is_str), ("type", is_str)])?;
            }
            "tool_execution_initiation" => {
                require_items(rec, index, "tools_to_execute", &[("tool_name", is_str), ("tool_args", |_| true), ("tool_id", is_str)])?;
            }
            "tool_execution_completion" => {
                require_items(
                    rec,
                    index,
                    "tool_results",
                    &[("message_type", is_str), ("content_preview", is_str), ("content_length", is_uint)],
                )?;
            }
            "tool_result" | "reward_feedback" => {
                require(rec, index, "message_type", is_str)?;
                for (k, c) in content {
                    require(rec, index, k, *c)?;
                }
            }
            "reflection" => {
                require(rec, index, "extracted_score", is_score)?;
                require(rec, index, "full_reflection_content", is_str)?;
            }
            "execution_summary" => {
                require(rec, index, "total_execution_time", is_num)?;
                require(rec, index, "total_tokens", is_uint)?;
                require(rec, index, "total_cost", is_num)?;
                require(rec, index, "final_message_count", is_uint)?;
                require(rec, index, "competition_name", is_str)?;
            }
            other => warnings.push(format!("step {}: unknown step_type '{other}'", index + 1)),
        }
    }
    Ok(warnings)
}

/// Human-readable rendering of a validated log.
pub fn render_log(log: &Value) -> String {
    let mut out = String::new();
    if let (Some(c), Some(a)) = (log["competition_name"].as_str(), log["algorithm"].as_str()) {
        out.push_str(&format!("{c} / {a} / seed {}\n\n", log["seed"]));
    }
    for s in log["steps"].as_array().into_iter().flatten() {
        let n = &s["step_number"];
        let ty = s["step_type"].as_str().unwrap_or("?");
        let line = match ty {
            "tool_selection" => {
                let calls: Vec<String> = s["tool_calls_detail"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .map(|c| format!("{}({})", c["name"].as_str().unwrap_or("?"), c["args"]))
                    .collect();
                format!("select  {}", calls.join(", "))
            }
            "tool_execution_initiation" => {
                let calls: Vec<String> = s["tools_to_execute"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .map(|c| format!("{}({})", c["tool_name"].as_str().unwrap_or("?"), c["tool_args"]))
                    .collect();
                format!("execute {}", calls.join(", "))
            }
            "tool_execution_completion" => {
                let r = &s["tool_results"][0];
                format!("result  {}", first_line(r["content_preview"].as_str().unwrap_or("")))
            }
            "tool_result" => format!("result  {}", first_line(s["content_preview"].as_str().unwrap_or(""))),
            "reward_feedback" => format!("reward  {}", first_line(s["content_preview"].as_str().unwrap_or(""))),
            "reflection" => format!("reflect score={} {}", s["extracted_score"], first_line(s["content_preview"].as_str().unwrap_or(""))),
            "execution_summary" => format!(
                "summary time={}s tokens={} cost={} messages={}",
                s["total_execution_time"], s["total_tokens"], s["total_cost"], s["final_message_count"]
            ),
            other => format!("{other} {}", s["action"].as_str().unwrap_or("")),
        };
        out.push_str(&format!("{n:>4} {line}\n"));
    }
    out
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or("")
}
