//! Policy backed by an OpenAI-compatible chat-completions endpoint.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::message::{Message, Role, ToolCall};
use crate::policy::{
    dedup_proposals, parse_score, system_prompt, ActionProposal, Evaluation, Policy, PolicyError, ProposedCall,
    Proposals, TrajectoryContext, Usage, JUDGE_PROMPT,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            retries: 3,
            backoff_ms: 500,
            timeout_secs: 120,
        }
    }
}

pub struct LlmPolicy {
    cfg: LlmConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl LlmPolicy {
    pub fn new(cfg: LlmConfig) -> LlmPolicy {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(cfg.timeout_secs)).build();
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        LlmPolicy { cfg, agent, api_key }
    }

    pub fn config(&self) -> &LlmConfig {
        &self.cfg
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    fn post(&self, body: &Value) -> Result<Value, PolicyError> {
        let payload = serde_json::to_string(body).expect("request serializes");
        let attempts = self.cfg.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.cfg.backoff_ms << (attempt - 1)));
            }
            let mut req = self.agent.post(&self.endpoint()).set("Content-Type", "application/json");
            if let Some(k) = &self.api_key {
                req = req.set("Authorization", &format!("Bearer {k}"));
            }
            match req.send_string(&payload) {
                Ok(resp) => {
                    let text = resp.into_string().map_err(|e| PolicyError::MalformedBackendReply(e.to_string()))?;
                    return serde_json::from_str(&text).map_err(|e| PolicyError::MalformedBackendReply(e.to_string()));
                }
                Err(e) => {
                    log::warn!("chat completion attempt {} failed: {e}", attempt + 1);
                    last = e.to_string();
                }
            }
        }
        Err(PolicyError::BackendUnavailable { attempts, last })
    }

    /// Request body for a proposal call.
    pub fn proposal_request(&self, ctx: &TrajectoryContext, k: usize) -> Value {
        json!({
            "model": self.cfg.model,
            "messages": wire_messages(&ctx.messages, &system_prompt(ctx.prefix.as_deref())),
            "tools": ctx.tools,
            "tool_choice": "auto",
            "n": k,
        })
    }

    /// Request body for a judge call.
    pub fn judge_request(&self, ctx: &TrajectoryContext) -> Value {
        json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": JUDGE_PROMPT},
                {"role": "user", "content": ctx.render()},
            ],
            "n": 1,
        })
    }
}

/// Messages in chat-completion wire format, with the system prompt replaced.
pub fn wire_messages(messages: &[Message], system: &str) -> Vec<Value> {
    let mut out = Vec::with_capacity(messages.len() + 1);
    if messages.first().is_none_or(|m| m.role != Role::System) {
        out.push(json!({"role": "system", "content": system}));
    }
    for m in messages {
        out.push(match m.role {
            Role::System => json!({"role": "system", "content": system}),
            Role::Human => json!({"role": "user", "content": m.content}),
            Role::Ai => {
                let mut v = json!({"role": "assistant", "content": m.content});
                if !m.tool_calls.is_empty() {
                    let calls: Vec<Value> = m
                        .tool_calls
                        .iter()
                        .map(|c| {
                            let arguments = match &c.args {
                                Value::String(raw) => raw.clone(),
                                other => other.to_string(),
                            };
                            json!({"id": c.id, "type": "function", "function": {"name": c.name, "arguments": arguments}})
                        })
                        .collect();
                    v["tool_calls"] = Value::Array(calls);
                }
                v
            }
            Role::Tool => json!({
                "role": "tool",
                "tool_call_id": m.tool_call_id.clone().unwrap_or_default(),
                "content": m.content,
            }),
        });
    }
    out
}

fn parse_usage(reply: &Value) -> Usage {
    let u = &reply["usage"];
    let n = |k: &str| u[k].as_u64().unwrap_or(0);
    Usage {
        prompt_tokens: n("prompt_tokens"),
        completion_tokens: n("completion_tokens"),
        total_tokens: n("total_tokens"),
        cost: u["cost"].as_f64().unwrap_or(0.0),
    }
}

fn choices(reply: &Value) -> Result<&Vec<Value>, PolicyError> {
    reply["choices"]
        .as_array()
        .ok_or_else(|| PolicyError::MalformedBackendReply("reply has no `choices` array".into()))
}

/// Proposals from a chat-completion reply: every tool call of every choice,
/// or a null action for a choice without tool calls.
pub fn parse_proposals(reply: &Value, k: usize) -> Result<Proposals, PolicyError> {
    let mut items = Vec::new();
    for choice in choices(reply)? {
        let msg = &choice["message"];
        let reasoning = msg["content"].as_str().filter(|s| !s.is_empty()).map(str::to_string);
        let calls = msg["tool_calls"].as_array().cloned().unwrap_or_default();
        if calls.is_empty() {
            items.push(ActionProposal { reasoning, call: None });
            continue;
        }
        for c in calls {
            let call_id = c["id"].as_str().unwrap_or_default().to_string();
            let tool = c["function"]["name"]
                .as_str()
                .ok_or_else(|| PolicyError::MalformedBackendReply("tool call without a function name".into()))?
                .to_string();
            let raw_args = match &c["function"]["arguments"] {
                Value::String(s) => s.clone(),
                Value::Null => "{}".to_string(),
                other => other.to_string(),
            };
            let parsed = serde_json::from_str::<Value>(&raw_args)
                .map_err(|e| format!("could not parse the tool arguments as JSON ({e})"))
                .and_then(|args| ToolCall::from_args(&tool, &call_id, &args));
            let call = match parsed {
                Ok(tc) => ProposedCall::Valid(tc),
                Err(error) => ProposedCall::Invalid { call_id, tool, raw_args, error },
            };
            items.push(ActionProposal { reasoning: reasoning.clone(), call: Some(call) });
        }
    }
    Ok(Proposals { items: dedup_proposals(items, k), usage: parse_usage(reply) })
}

pub fn parse_evaluation(reply: &Value) -> Result<Evaluation, PolicyError> {
    let text = choices(reply)?
        .first()
        .and_then(|c| c["message"]["content"].as_str())
        .ok_or_else(|| PolicyError::MalformedBackendReply("judge reply has no content".into()))?
        .to_string();
    let score = parse_score(&text).unwrap_or_else(|| {
        log::warn!("judge reply has no score line, using 0");
        0.0
    });
    Ok(Evaluation { score, reflection: text, usage: parse_usage(reply) })
}

impl Policy for LlmPolicy {
    fn propose(&self, ctx: &TrajectoryContext, k: usize) -> Result<Proposals, PolicyError> {
        let reply = self.post(&self.proposal_request(ctx, k))?;
        parse_proposals(&reply, k)
    }

    fn evaluate(&self, ctx: &TrajectoryContext) -> Result<Evaluation, PolicyError> {
        let reply = self.post(&self.judge_request(ctx))?;
        parse_evaluation(&reply)
    }

    fn is_remote(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_arguments_become_invalid_proposals() {
        let reply = json!({"choices": [{"message": {"content": "", "tool_calls": [
            {"id": "c1", "type": "function", "function": {"name": "read_data", "arguments": "{not json"}},
            {"id": "c2", "type": "function", "function": {"name": "read_data", "arguments": "{\"output\": \"x\", \"func_kwargs\": {\"filepath\": \"a\"}}"}}
        ]}}]});
        let p = parse_proposals(&reply, 3).unwrap();
        assert_eq!(p.items.len(), 2);
        assert!(matches!(p.items[0].call, Some(ProposedCall::Invalid { .. })));
        assert!(matches!(p.items[1].call, Some(ProposedCall::Valid(_))));
    }

    #[test]
    fn missing_choices_is_malformed() {
        assert!(matches!(parse_proposals(&json!({}), 1), Err(PolicyError::MalformedBackendReply(_))));
    }

    #[test]
    fn no_score_line_means_zero() {
        let reply = json!({"choices": [{"message": {"content": "Looks fine."}}]});
        assert_eq!(parse_evaluation(&reply).unwrap().score, 0.0);
    }
}
