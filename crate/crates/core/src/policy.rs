//! Action proposal and trajectory evaluation backends.

use std::collections::{BTreeMap, HashSet};

use rand::distr::{Alphanumeric, SampleString};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::message::{Message, Role, ToolCall};
use crate::stage::StageId;

pub const DEFAULT_SYSTEM_PROMPT: &str = "You are a Data Scientist tasked with solving the Kaggle competition provided below, with the tools available to you. Propose tool candidates that would help solve the problem at the current stage.";
pub const STAGE_INSTRUCTION: &str = "Propose tool candidates that would help solve the problem at the current stage.";
pub const JUDGE_PROMPT: &str = "You are a Data Science judge, who evaluates the goodness of tool calling trajectories to solve Machine Learning tasks on Kaggle. Reflect and grade the agent's trajectory plan for the provided challenge. The trajectories should be aimed towards solving the challenge, i.e., generating a trained model and a valid submission file. Keep your reflections concise and to the point.";
pub const SCORE_SCALE: f64 = 10.0;

/// System prompt for a proposal call, specialised to a subtask when a prefix
/// is set.
pub fn system_prompt(prefix: Option<&str>) -> String {
    match prefix {
        Some(p) => format!("{}. {STAGE_INSTRUCTION}", p.trim_end().trim_end_matches('.')),
        None => DEFAULT_SYSTEM_PROMPT.to_string(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
    #[serde(default)]
    pub cost: f64,
}

impl Usage {
    pub fn add(&mut self, other: Usage) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.total_tokens += other.total_tokens;
        self.cost += other.cost;
    }
}

/// A proposed tool call, or the backend's unparsable attempt at one.
#[derive(Clone, Debug, PartialEq)]
pub enum ProposedCall {
    Valid(ToolCall),
    Invalid { call_id: String, tool: String, raw_args: String, error: String },
}

impl ProposedCall {
    pub fn call_id(&self) -> &str {
        match self {
            ProposedCall::Valid(c) => &c.call_id,
            ProposedCall::Invalid { call_id, .. } => call_id,
        }
    }

    pub fn tool(&self) -> &str {
        match self {
            ProposedCall::Valid(c) => &c.tool,
            ProposedCall::Invalid { tool, .. } => tool,
        }
    }

    fn dedup_key(&self) -> String {
        match self {
            ProposedCall::Valid(c) => c.dedup_key(),
            ProposedCall::Invalid { tool, raw_args, .. } => format!("{tool}:!{raw_args}"),
        }
    }
}

/// One candidate action. Both parts empty is the null action.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionProposal {
    pub reasoning: Option<String>,
    pub call: Option<ProposedCall>,
}

impl ActionProposal {
    pub fn tool(call: ToolCall, reasoning: Option<String>) -> ActionProposal {
        ActionProposal { reasoning, call: Some(ProposedCall::Valid(call)) }
    }

    pub fn is_null(&self) -> bool {
        self.call.is_none()
    }
}

/// Drop repeated (tool, arguments) pairs and keep at most `k` proposals.
pub fn dedup_proposals(items: Vec<ActionProposal>, k: usize) -> Vec<ActionProposal> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for p in items {
        let key = match &p.call {
            Some(c) => c.dedup_key(),
            None => "null".to_string(),
        };
        if seen.insert(key) {
            out.push(p);
        }
        if out.len() == k {
            break;
        }
    }
    out
}

/// Input to a policy call: the messages from the root to the node.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryContext {
    pub messages: Vec<Message>,
    /// Function schemas of the exposed tools.
    pub tools: Vec<Value>,
    pub prefix: Option<String>,
    pub stage: Option<StageId>,
}

impl TrajectoryContext {
    pub fn tool_names(&self) -> Vec<&str> {
        self.tools.iter().filter_map(|s| s["function"]["name"].as_str()).collect()
    }

    fn schema(&self, tool: &str) -> Option<&Value> {
        self.tools.iter().find(|s| s["function"]["name"].as_str() == Some(tool))
    }

    /// Calls whose tool reply reported success, in order.
    pub fn executed_calls(&self) -> Vec<ToolCall> {
        let mut pending = BTreeMap::new();
        let mut done = Vec::new();
        for m in &self.messages {
            match m.role {
                Role::Ai => {
                    for r in &m.tool_calls {
                        if let Ok(c) = ToolCall::from_args(&r.name, &r.id, &r.args) {
                            pending.insert(r.id.clone(), c);
                        }
                    }
                }
                Role::Tool if m.content.starts_with("Applied ") => {
                    if let Some(c) = m.tool_call_id.as_ref().and_then(|id| pending.remove(id)) {
                        done.push(c);
                    }
                }
                _ => {}
            }
        }
        done
    }

    /// Plain-text rendering used by the judge.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            match m.role {
                Role::System => {}
                Role::Human => {
                    out.push_str(&format!("Human: {}\n\n", m.content));
                }
                Role::Ai => {
                    if !m.content.is_empty() {
                        out.push_str(&format!("AI: {}\n", m.content));
                    }
                    for c in &m.tool_calls {
                        out.push_str(&format!("Tool call: {}({})\n", c.name, c.args));
                    }
                    out.push('\n');
                }
                Role::Tool => out.push_str(&format!("Tool output: {}\n\n", m.content)),
            }
        }
        out.trim_end().to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Proposals {
    pub items: Vec<ActionProposal>,
    pub usage: Usage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Judge score in `[0, 10]`.
    pub score: f64,
    pub reflection: String,
    pub usage: Usage,
}

impl Evaluation {
    pub fn value(&self) -> f64 {
        self.score / SCORE_SCALE
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("backend unavailable after {attempts} attempts: {last}")]
    BackendUnavailable { attempts: u32, last: String },
    #[error("malformed backend reply: {0}")]
    MalformedBackendReply(String),
    #[error("playbook exhausted")]
    PlaybookExhausted,
}

/// Proposal and evaluation backend shared by all planners.
pub trait Policy: Send + Sync {
    /// Up to `k` distinct candidate actions for the node.
    fn propose(&self, ctx: &TrajectoryContext, k: usize) -> Result<Proposals, PolicyError>;

    /// Judge the trajectory leading to the node.
    fn evaluate(&self, ctx: &TrajectoryContext) -> Result<Evaluation, PolicyError>;

    /// Whether token usage comes from a remote backend.
    fn is_remote(&self) -> bool {
        false
    }
}

/// The last `Score: n` line of a judge reply, clamped to the score scale.
pub fn parse_score(text: &str) -> Option<f64> {
    text.lines().rev().find_map(|line| {
        let rest = line.trim().strip_prefix("Score:")?;
        let num: String = rest.trim().chars().take_while(|c| c.is_ascii_digit() || *c == '.').collect();
        num.parse::<f64>().ok().map(|s| s.clamp(0.0, SCORE_SCALE))
    })
}

pub fn random_call_id(rng: &mut impl Rng) -> String {
    format!("call_{}", Alphanumeric.sample_string(rng, 24))
}

/// Deterministic stand-in for the LLM: replays a playbook, optionally
/// swapping steps for random tools.
#[derive(Clone, Debug)]
pub struct ScriptedPolicy {
    pub playbook: Vec<ToolCall>,
    /// Probability of replacing a proposal by a random exposed tool.
    pub epsilon: f64,
    pub seed: u64,
}

impl ScriptedPolicy {
    pub fn new(playbook: Vec<ToolCall>, epsilon: f64, seed: u64) -> ScriptedPolicy {
        ScriptedPolicy { playbook, epsilon, seed }
    }

    fn rng(&self, ctx: &TrajectoryContext, salt: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(salt.as_bytes());
        h.update(serde_json::to_vec(&ctx.messages).expect("messages serialize"));
        if let Some(p) = &ctx.prefix {
            h.update(p.as_bytes());
        }
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    /// Number of playbook steps covered by the successful calls on the path.
    /// Calls are matched as a subsequence, so skipped steps do not block
    /// later ones.
    pub fn progress(&self, ctx: &TrajectoryContext) -> usize {
        let mut p = 0;
        for c in ctx.executed_calls() {
            if let Some(j) = self.playbook[p..].iter().position(|s| c.same_action(s)) {
                p += j + 1;
            }
        }
        p
    }

    /// Next step at or after the progress point whose tool is exposed.
    fn next_step(&self, ctx: &TrajectoryContext) -> Option<(usize, &ToolCall)> {
        let names = ctx.tool_names();
        let p = self.progress(ctx);
        self.playbook
            .iter()
            .enumerate()
            .skip(p)
            .find(|(_, s)| names.is_empty() || names.contains(&s.tool.as_str()))
    }

    /// The next playbook step for the context, without noise.
    pub fn scripted_step(&self, ctx: &TrajectoryContext) -> Result<ActionProposal, PolicyError> {
        let (i, step) = self.next_step(ctx).ok_or(PolicyError::PlaybookExhausted)?;
        let mut rng = self.rng(ctx, "step");
        let mut call = step.clone();
        call.call_id = random_call_id(&mut rng);
        Ok(ActionProposal::tool(call, Some(format!("Step {}: call {}.", i + 1, step.tool))))
    }

    fn noisy_call(&self, ctx: &TrajectoryContext, step: &ToolCall, rng: &mut ChaCha8Rng) -> Option<ToolCall> {
        let names = ctx.tool_names();
        if names.is_empty() {
            return None;
        }
        let tool = names[rng.random_range(0..names.len())];
        let params = &ctx.schema(tool)?["function"]["parameters"]["properties"];
        let mut call = ToolCall::new(tool, "");
        for (k, v) in &step.bindings {
            if params["bindings"]["properties"].get(k).is_some() {
                call.bindings.insert(k.clone(), v.clone());
            }
        }
        let kwargs: Map<String, Value> = step
            .func_kwargs
            .iter()
            .filter(|(k, _)| params["func_kwargs"]["properties"].get(k.as_str()).is_some())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        call.func_kwargs = kwargs;
        if params.get("output").is_some() {
            call.output = step.output.clone().or_else(|| Some(format!("{tool}_result")));
        }
        Some(call)
    }
}

impl Policy for ScriptedPolicy {
    fn propose(&self, ctx: &TrajectoryContext, k: usize) -> Result<Proposals, PolicyError> {
        let Some((i, step)) = self.next_step(ctx) else { return Ok(Proposals::default()) };
        let mut rng = self.rng(ctx, "propose");
        let mut items = Vec::new();
        for _ in 0..k.max(1) {
            let noisy = self.epsilon > 0.0 && rng.random::<f64>() < self.epsilon;
            let (mut call, reasoning) = match noisy.then(|| self.noisy_call(ctx, step, &mut rng)).flatten() {
                Some(c) => {
                    let r = format!("Trying {} instead.", c.tool);
                    (c, r)
                }
                None => (step.clone(), format!("Step {}: call {}.", i + 1, step.tool)),
            };
            call.call_id = random_call_id(&mut rng);
            items.push(ActionProposal::tool(call, Some(reasoning)));
        }
        Ok(Proposals { items: dedup_proposals(items, k), usage: Usage::default() })
    }

    fn evaluate(&self, ctx: &TrajectoryContext) -> Result<Evaluation, PolicyError> {
        let done = self.progress(ctx);
        let total = self.playbook.len().max(1);
        let mut score = (SCORE_SCALE * done as f64 / total as f64).round();
        if self.epsilon > 0.0 {
            let mut rng = self.rng(ctx, "judge");
            score += rng.random_range(-1..=1) as f64;
        }
        let score = score.clamp(0.0, SCORE_SCALE);
        let failed = ctx
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::Tool)
            .is_some_and(|m| m.content.starts_with("Error"));
        let mut reasoning = format!("Reasoning: The trajectory has completed {done} of {total} planned pipeline steps.");
        if failed {
            reasoning.push_str(" The most recent tool call failed and must be fixed before progressing.");
        }
        Ok(Evaluation { score, reflection: format!("{reasoning}\nScore: {score}"), usage: Usage::default() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::{CallRecord, HumanKind};

    fn ctx(messages: Vec<Message>) -> TrajectoryContext {
        TrajectoryContext { messages, tools: vec![], prefix: None, stage: None }
    }

    fn playbook() -> Vec<ToolCall> {
        vec![
            ToolCall::new("read_data", "").kwarg("filepath", "a.csv").output("a"),
            ToolCall::new("read_data", "").kwarg("filepath", "b.csv").output("b"),
        ]
    }

    #[test]
    fn score_line_parsing() {
        assert_eq!(parse_score("Reasoning: fine\nScore: 6"), Some(6.0));
        assert_eq!(parse_score("Score: 3\nmore\nScore: 4"), Some(4.0));
        assert_eq!(parse_score("Score: 7.5 points"), Some(7.5));
        assert_eq!(parse_score("Score: 42"), Some(10.0));
        assert_eq!(parse_score("no score here"), None);
    }

    #[test]
    fn prefix_prompt_drops_trailing_period() {
        let p = system_prompt(Some("Load the data."));
        assert_eq!(p, format!("Load the data. {STAGE_INSTRUCTION}"));
        assert_eq!(system_prompt(None), DEFAULT_SYSTEM_PROMPT);
    }

    #[test]
    fn scripted_follows_successful_calls_only() {
        let pol = ScriptedPolicy::new(playbook(), 0.0, 1);
        let first = pol.scripted_step(&ctx(vec![])).unwrap();
        let ProposedCall::Valid(c) = first.call.unwrap() else { panic!() };
        assert!(c.same_action(&playbook()[0]));
        assert!(c.call_id.starts_with("call_") && c.call_id.len() == 29);

        let ai = Message::ai("", vec![CallRecord::from(&c)]);
        let failed = ctx(vec![ai.clone(), Message::tool(&c.call_id, "Error: boom")]);
        assert_eq!(pol.progress(&failed), 0);
        let ok = ctx(vec![ai, Message::tool(&c.call_id, "Applied read_data"), Message::human(HumanKind::RewardFeedback, "x")]);
        assert_eq!(pol.progress(&ok), 1);
    }

    #[test]
    fn exhausted_playbook_proposes_nothing() {
        let pol = ScriptedPolicy::new(vec![], 0.0, 1);
        assert!(pol.propose(&ctx(vec![]), 3).unwrap().items.is_empty());
        assert!(matches!(pol.scripted_step(&ctx(vec![])), Err(PolicyError::PlaybookExhausted)));
    }

    #[test]
    fn noiseless_candidates_collapse_to_one() {
        let pol = ScriptedPolicy::new(playbook(), 0.0, 1);
        let a = pol.propose(&ctx(vec![]), 3).unwrap();
        assert_eq!(a.items.len(), 1);
        assert_eq!(a, pol.propose(&ctx(vec![]), 3).unwrap());
    }

    #[test]
    fn full_noise_never_follows_playbook() {
        let schema = |n: &str| serde_json::json!({"type": "function", "function": {"name": n, "parameters": {"properties": {}}}});
        let mut c = ctx(vec![]);
        c.tools = vec![schema("x"), schema("y")];
        let pol = ScriptedPolicy::new(playbook(), 1.0, 9);
        for seed in 0..20 {
            let pol = ScriptedPolicy { seed, ..pol.clone() };
            for p in pol.propose(&c, 3).unwrap().items {
                assert_ne!(p.call.unwrap().tool(), "read_data");
            }
        }
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let a = ActionProposal::tool(ToolCall::new("t", "1").bind("df", "x"), None);
        let b = ActionProposal::tool(ToolCall::new("t", "2").bind("df", "x"), None);
        let c = ActionProposal::tool(ToolCall::new("t", "3").bind("df", "y"), None);
        let out = dedup_proposals(vec![a.clone(), b, c.clone()], 3);
        assert_eq!(out, vec![a, c]);
    }
}
