//! Tool calls and conversation messages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// One parameterized tool invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    #[serde(default)]
    pub bindings: BTreeMap<String, String>,
    #[serde(default)]
    pub func_kwargs: Map<String, Value>,
    #[serde(default)]
    pub output: Option<String>,
    pub call_id: String,
}

impl ToolCall {
    pub fn new(tool: impl Into<String>, call_id: impl Into<String>) -> ToolCall {
        ToolCall {
            tool: tool.into(),
            bindings: BTreeMap::new(),
            func_kwargs: Map::new(),
            output: None,
            call_id: call_id.into(),
        }
    }

    pub fn bind(mut self, param: &str, name: &str) -> ToolCall {
        self.bindings.insert(param.to_string(), name.to_string());
        self
    }

    pub fn kwarg(mut self, param: &str, value: impl Into<Value>) -> ToolCall {
        self.func_kwargs.insert(param.to_string(), value.into());
        self
    }

    pub fn output(mut self, name: &str) -> ToolCall {
        self.output = Some(name.to_string());
        self
    }

    /// The `{bindings, func_kwargs, output}` argument object; empty parts are
    /// omitted.
    pub fn args_json(&self) -> Value {
        let mut m = Map::new();
        if !self.bindings.is_empty() {
            m.insert("bindings".into(), serde_json::to_value(&self.bindings).expect("string map"));
        }
        if !self.func_kwargs.is_empty() {
            m.insert("func_kwargs".into(), Value::Object(self.func_kwargs.clone()));
        }
        if let Some(o) = &self.output {
            m.insert("output".into(), Value::String(o.clone()));
        }
        Value::Object(m)
    }

    /// Identity used for deduplication: tool plus canonical arguments.
    pub fn dedup_key(&self) -> String {
        format!("{}:{}", self.tool, self.args_json())
    }

    /// Same tool and arguments, ignoring the call id.
    pub fn same_action(&self, other: &ToolCall) -> bool {
        self.tool == other.tool
            && self.bindings == other.bindings
            && self.func_kwargs == other.func_kwargs
            && self.output == other.output
    }

    /// Parse the argument object of a function call.
    pub fn from_args(tool: &str, call_id: &str, args: &Value) -> Result<ToolCall, String> {
        let obj = args.as_object().ok_or_else(|| format!("arguments must be a JSON object, got {args}"))?;
        let mut call = ToolCall::new(tool, call_id);
        for (k, v) in obj {
            match k.as_str() {
                "bindings" => match v {
                    Value::Null => {}
                    Value::Object(b) => {
                        for (p, n) in b {
                            let n = n.as_str().ok_or_else(|| {
                                format!("binding '{p}' must name a scratchpad key (a string), got {n}")
                            })?;
                            call.bindings.insert(p.clone(), n.to_string());
                        }
                    }
                    other => return Err(format!("'bindings' must be an object, got {other}")),
                },
                "func_kwargs" => match v {
                    Value::Null => {}
                    Value::Object(m) => call.func_kwargs = m.clone(),
                    other => return Err(format!("'func_kwargs' must be an object, got {other}")),
                },
                "output" => match v {
                    Value::Null => {}
                    Value::String(s) => call.output = Some(s.clone()),
                    other => return Err(format!("'output' must be a string, got {other}")),
                },
                other => return Err(format!("unexpected argument section '{other}' (expected bindings, func_kwargs, output)")),
            }
        }
        Ok(call)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    System,
    Human,
    Ai,
    Tool,
}

impl Role {
    /// Class name used in trajectory logs.
    pub fn message_type(self) -> &'static str {
        match self {
            Role::System => "SystemMessage",
            Role::Human => "HumanMessage",
            Role::Ai => "AIMessage",
            Role::Tool => "ToolMessage",
        }
    }
}

/// A tool call as it appears on an AI message. `args` is the raw argument
/// object, or a string when the backend sent unparsable arguments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub id: String,
    pub name: String,
    pub args: Value,
}

impl From<&ToolCall> for CallRecord {
    fn from(c: &ToolCall) -> Self {
        CallRecord { id: c.call_id.clone(), name: c.tool.clone(), args: c.args_json() }
    }
}

/// Why a Human message was added to the trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HumanKind {
    Task,
    RewardFeedback,
    Reflection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<CallRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_kind: Option<HumanKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Message {
        Message::plain(Role::System, content.into())
    }

    pub fn human(kind: HumanKind, content: impl Into<String>) -> Message {
        Message { human_kind: Some(kind), ..Message::plain(Role::Human, content.into()) }
    }

    pub fn reflection(content: impl Into<String>, score: f64) -> Message {
        Message { score: Some(score), ..Message::human(HumanKind::Reflection, content) }
    }

    pub fn ai(content: impl Into<String>, tool_calls: Vec<CallRecord>) -> Message {
        Message { tool_calls, ..Message::plain(Role::Ai, content.into()) }
    }

    pub fn tool(call_id: &str, content: impl Into<String>) -> Message {
        Message { tool_call_id: Some(call_id.to_string()), ..Message::plain(Role::Tool, content.into()) }
    }

    fn plain(role: Role, content: String) -> Message {
        Message { role, content, tool_calls: Vec::new(), tool_call_id: None, human_kind: None, score: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn args_round_trip() {
        let c = ToolCall::new("read_data", "c1").kwarg("filepath", "data/x.csv").output("train_df");
        assert_eq!(c.args_json(), json!({"func_kwargs": {"filepath": "data/x.csv"}, "output": "train_df"}));
        let back = ToolCall::from_args("read_data", "c1", &c.args_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn bad_args_are_reported() {
        assert!(ToolCall::from_args("t", "c", &json!("x")).is_err());
        assert!(ToolCall::from_args("t", "c", &json!({"bindings": {"df": 3}})).is_err());
        assert!(ToolCall::from_args("t", "c", &json!({"extra": 1})).is_err());
    }

    #[test]
    fn dedup_ignores_call_id() {
        let a = ToolCall::new("t", "a").bind("df", "x");
        let b = ToolCall::new("t", "b").bind("df", "x");
        assert_eq!(a.dedup_key(), b.dedup_key());
        assert!(a.same_action(&b));
    }
}
