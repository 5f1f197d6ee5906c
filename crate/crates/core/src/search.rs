//! Planners over tool-call trajectories: a ReAct loop, MCTS with outcome or
//! shaped rewards, LATS with a judge, and hierarchical MCTS over the stages.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use toolplan_tabular::Table;

use crate::artifact::Artifact;
use crate::message::{CallRecord, HumanKind, Message, ToolCall};
use crate::policy::{ActionProposal, Policy, PolicyError, ProposedCall, TrajectoryContext, Usage, DEFAULT_SYSTEM_PROMPT};
use crate::registry::{ErrorKind, IoEvent, Registry, RegistryError, RegistryView, ToolEnv, ToolResult};
use crate::rewards::{
    check_stage, depth_adjust, is_solved, outcome_reward, shaped_reward, tool_failure_feedback, PathState,
    RewardContext, StageFacts, Step,
};
use crate::scratchpad::{NodeId, NodePad, PathView, Scratchpad, DEFAULT_SOFT_CAP};
use crate::stage::{StageId, StageSet};
use crate::trajlog::{ClockKind, TrajectoryLog, TrajectoryLogger};

pub const DEFAULT_W: f64 = 1.0;
pub const DEFAULT_K: usize = 3;
pub const DEFAULT_MAX_ITERATIONS: usize = 50;
pub const DEFAULT_MAX_DEPTH: usize = 40;
pub const DEFAULT_MAX_SUBTASK_DEPTH: usize = 6;

const UNCACHED_TOOLS: [&str; 4] = ["read_data", "save_dataframe_to_csv", "save_model", "load_model"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "react")]
    React,
    #[serde(rename = "lats")]
    Lats,
    #[serde(rename = "mcts-outcome")]
    MctsOutcome,
    #[serde(rename = "mcts-shaped")]
    MctsShaped,
    #[serde(rename = "hierarchical")]
    Hierarchical,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::React, Algorithm::Lats, Algorithm::MctsOutcome, Algorithm::MctsShaped, Algorithm::Hierarchical];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::React => "react",
            Algorithm::Lats => "lats",
            Algorithm::MctsOutcome => "mcts-outcome",
            Algorithm::MctsShaped => "mcts-shaped",
            Algorithm::Hierarchical => "hierarchical",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Algorithm, SearchError> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| SearchError::InvalidConfig(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Exploration weight.
    pub w: f64,
    /// Candidates requested per expansion.
    pub k: usize,
    /// Iteration budget (per subtask for the hierarchical planner).
    pub max_iterations: usize,
    pub max_depth: usize,
    pub max_subtask_depth: usize,
    /// Expose only the current subtask's tools (hierarchical only).
    pub masking: bool,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            w: DEFAULT_W,
            k: DEFAULT_K,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            max_depth: DEFAULT_MAX_DEPTH,
            max_subtask_depth: DEFAULT_MAX_SUBTASK_DEPTH,
            masking: true,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidConfig(m.to_string()));
        if !(self.w > 0.0 && self.w.is_finite()) {
            return bad("exploration weight w must be positive");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.max_iterations == 0 {
            return bad("the iteration budget must be at least 1");
        }
        if self.max_depth == 0 || self.max_subtask_depth == 0 {
            return bad("depth limits must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("node has no selectable children")]
    NoChildren,
}

// ---------------------------------------------------------------------------
// Tree bookkeeping

/// UCT score; unvisited children score infinity.
pub fn uct_score(value: f64, visits: u32, parent_visits: u32, w: f64) -> f64 {
    if visits == 0 {
        return f64::INFINITY;
    }
    value + w * ((parent_visits as f64).ln() / visits as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeEntry {
    /// Global node; `None` for the virtual root.
    pub node: Option<NodeId>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub value: f64,
    pub visits: u32,
    /// Depth relative to the search's seeds.
    pub depth: usize,
    pub expanded: bool,
    pub terminal: bool,
    pub solution: bool,
    pub exhausted: bool,
}

/// One search's view of the node store: a virtual root whose children are the
/// seed nodes, plus statistics.
#[derive(Clone, Debug)]
pub struct SearchTree {
    entries: Vec<TreeEntry>,
}

impl Default for SearchTree {
    fn default() -> Self {
        SearchTree::new()
    }
}

impl SearchTree {
    pub const ROOT: usize = 0;

    pub fn new() -> SearchTree {
        let root = TreeEntry {
            node: None,
            parent: None,
            children: Vec::new(),
            value: 0.0,
            visits: 0,
            depth: 0,
            expanded: true,
            terminal: false,
            solution: false,
            exhausted: false,
        };
        SearchTree { entries: vec![root] }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.len() <= 1
    }

    pub fn entry(&self, i: usize) -> &TreeEntry {
        &self.entries[i]
    }

    pub fn add_child(&mut self, parent: usize, node: Option<NodeId>, depth: usize) -> usize {
        let i = self.entries.len();
        self.entries.push(TreeEntry {
            node,
            parent: Some(parent),
            children: Vec::new(),
            value: 0.0,
            visits: 0,
            depth,
            expanded: false,
            terminal: false,
            solution: false,
            exhausted: false,
        });
        self.entries[parent].children.push(i);
        self.entries[parent].expanded = true;
        i
    }

    /// Add `r` to the running mean of `leaf` and all its ancestors.
    pub fn backpropagate(&mut self, leaf: usize, r: f64) {
        let mut cur = Some(leaf);
        while let Some(i) = cur {
            let e = &mut self.entries[i];
            e.visits += 1;
            e.value = (e.value * (e.visits - 1) as f64 + r) / e.visits as f64;
            cur = e.parent;
        }
    }

    /// The child of `p` maximizing UCT among those not exhausted. Unvisited
    /// children come first; ties go to the earliest child.
    pub fn uct_select(&self, p: usize, w: f64) -> Result<usize, SearchError> {
        let parent = &self.entries[p];
        let mut best: Option<(usize, f64)> = None;
        for &c in &parent.children {
            let e = &self.entries[c];
            if e.exhausted {
                continue;
            }
            if e.visits == 0 {
                return Ok(c);
            }
            let s = uct_score(e.value, e.visits, parent.visits, w);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        best.map(|(c, _)| c).ok_or(SearchError::NoChildren)
    }

    /// Mark `i` exhausted and propagate to ancestors whose children are all
    /// exhausted.
    pub fn mark_exhausted(&mut self, i: usize) {
        let mut cur = Some(i);
        while let Some(j) = cur {
            self.entries[j].exhausted = true;
            cur = self.entries[j].parent.filter(|&p| {
                let e = &self.entries[p];
                e.expanded && e.children.iter().all(|&c| self.entries[c].exhausted)
            });
        }
    }

    /// Follow the highest-valued visited child from the root.
    pub fn greedy_leaf(&self) -> usize {
        let mut i = SearchTree::ROOT;
        loop {
            let mut best: Option<(usize, f64)> = None;
            for &c in &self.entries[i].children {
                let e = &self.entries[c];
                if e.visits > 0 && best.is_none_or(|(_, v)| e.value > v) {
                    best = Some((c, e.value));
                }
            }
            match best {
                Some((c, _)) => i = c,
                None => return i,
            }
        }
    }

    pub fn solutions(&self) -> Vec<usize> {
        (0..self.entries.len()).filter(|&i| self.entries[i].solution).collect()
    }
}

// ---------------------------------------------------------------------------
// Node store

/// Everything a planner needs to know about the competition being solved.
pub struct Problem<'a> {
    pub competition: String,
    pub registry: &'a Registry,
    pub env: ToolEnv,
    pub facts: StageFacts,
    pub task_prompt: String,
    pub clock: ClockKind,
}

struct NodeRecord {
    parent: Option<NodeId>,
    messages: Vec<Message>,
    step: Option<Step>,
    status: StageSet,
}

type Memo = HashMap<String, (ToolResult, Vec<(String, Artifact)>)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Evaluator {
    Outcome,
    Shaped,
    Judge,
    Subtask(StageId),
}

struct Evaluated {
    reward: f64,
    goal: bool,
    submission: bool,
    fired: Vec<StageId>,
}

struct World<'a> {
    problem: &'a Problem<'a>,
    policy: &'a dyn Policy,
    store: Scratchpad,
    nodes: Vec<NodeRecord>,
    memo: Memo,
    usage: Usage,
}

const ROOT_NODE: NodeId = NodeId(0);

impl<'a> World<'a> {
    fn new(problem: &'a Problem<'a>, policy: &'a dyn Policy) -> World<'a> {
        let mut store = Scratchpad::new(DEFAULT_SOFT_CAP);
        store.insert(ROOT_NODE, NodePad::new());
        let root = NodeRecord {
            parent: None,
            messages: vec![
                Message::system(DEFAULT_SYSTEM_PROMPT),
                Message::human(HumanKind::Task, problem.task_prompt.clone()),
            ],
            step: None,
            status: StageSet::default(),
        };
        World { problem, policy, store, nodes: vec![root], memo: HashMap::new(), usage: Usage::default() }
    }

    fn rc(&self) -> RewardContext<'a> {
        RewardContext { facts: &self.problem.facts, registry: self.problem.registry }
    }

    fn path(&self, node: NodeId) -> Vec<NodeId> {
        let mut out = vec![node];
        let mut cur = self.nodes[node.0].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.nodes[p.0].parent;
        }
        out.reverse();
        out
    }

    fn view(&self, node: NodeId) -> PathView {
        PathView::from_path(self.path(node))
    }

    fn messages(&self, node: NodeId) -> Vec<Message> {
        self.path(node).into_iter().flat_map(|n| self.nodes[n.0].messages.iter().cloned()).collect()
    }

    fn state<'s>(&'s self, view: &'s PathView) -> PathState<'s> {
        let steps = view.nodes().iter().map(|n| self.nodes[n.0].step.as_ref()).collect();
        PathState { store: &self.store, view, steps }
    }

    fn context(&self, node: NodeId, tools: &[Value], stage: Option<StageId>) -> TrajectoryContext {
        TrajectoryContext {
            messages: self.messages(node),
            tools: tools.to_vec(),
            prefix: stage.map(|s| s.prefix().to_string()),
            stage,
        }
    }

    fn memo_key(&self, tools: RegistryView, call: &ToolCall, view: &PathView) -> Option<String> {
        if UNCACHED_TOOLS.contains(&call.tool.as_str()) {
            return None;
        }
        let mut key = format!("{:?}|{}", tools.mask_stage(), call.dedup_key());
        for name in call.bindings.values() {
            let e = self.store.resolve(view, name).ok()?;
            key.push('|');
            key.push_str(&e.value.handle_key());
        }
        Some(key)
    }

    fn invoke(&mut self, tools: RegistryView, call: &ToolCall, view: &PathView, pad: &mut NodePad) -> ToolResult {
        let key = self.memo_key(tools, call, view);
        if let Some((res, writes)) = key.as_ref().and_then(|k| self.memo.get(k)) {
            for (n, v) in writes {
                let _ = pad.put(n, v.clone(), &call.call_id);
            }
            return res.clone();
        }
        let res = tools.invoke(call, &self.store, view, pad, &self.problem.env);
        if let Some(k) = key {
            if res.ok && res.io.is_none() {
                let writes = pad.entries().iter().map(|e| (e.name.clone(), e.value.clone())).collect();
                self.memo.insert(k, (res.clone(), writes));
            }
        }
        res
    }

    /// Create a child of `parent` by executing the proposal.
    fn execute(&mut self, parent: NodeId, p: &ActionProposal, tools: RegistryView) -> NodeId {
        let view = self.view(parent);
        let id = NodeId(self.nodes.len());
        let mut pad = NodePad::new();
        let content = p.reasoning.clone().unwrap_or_default();
        let (messages, step) = match &p.call {
            Some(ProposedCall::Valid(call)) => {
                let result = self.invoke(tools, call, &view, &mut pad);
                let msgs = vec![
                    Message::ai(content, vec![CallRecord::from(call)]),
                    Message::tool(&call.call_id, result.message.clone()),
                ];
                (msgs, Some(Step { call: call.clone(), result }))
            }
            Some(ProposedCall::Invalid { call_id, tool, raw_args, error }) => {
                let result = ToolResult::failure(ErrorKind::MalformedCall, &format!("{tool}() arguments are invalid: {error}"));
                let record = CallRecord { id: call_id.clone(), name: tool.clone(), args: Value::String(raw_args.clone()) };
                let msgs = vec![Message::ai(content, vec![record]), Message::tool(call_id, result.message.clone())];
                (msgs, Some(Step { call: ToolCall::new(tool.as_str(), call_id.as_str()), result }))
            }
            None => (vec![Message::ai(content, vec![])], None),
        };
        self.store.insert(id, pad);
        let status = self.nodes[parent.0].status;
        self.nodes.push(NodeRecord { parent: Some(parent), messages, step, status });
        id
    }

    fn subtask_met(&self, stage: StageId, node: NodeId) -> bool {
        let view = self.view(node);
        check_stage(self.rc(), stage, &self.state(&view)).met
    }

    fn solved(&self, node: NodeId) -> bool {
        let view = self.view(node);
        is_solved(self.rc(), &self.state(&view))
    }

    /// Score a fresh child, appending its feedback message.
    fn evaluate(&mut self, node: NodeId, ev: Evaluator, depth: usize) -> Result<Evaluated, SearchError> {
        let status = self.nodes[node.0].status;
        let view = self.view(node);
        let (reward, message, status, fired, goal, submission) = {
            let st = self.state(&view);
            let rc = self.rc();
            let submission = is_solved(rc, &st);
            match ev {
                Evaluator::Shaped | Evaluator::Outcome => {
                    let (sig, next) =
                        if ev == Evaluator::Shaped { shaped_reward(rc, status, &st) } else { outcome_reward(rc, status, &st) };
                    let msg = Message::human(HumanKind::RewardFeedback, sig.feedback);
                    (sig.value, Some(msg), next, sig.fired, submission, submission)
                }
                Evaluator::Subtask(stage) => {
                    let check = check_stage(rc, stage, &st);
                    let failed = st.steps.last().copied().flatten().filter(|s| !s.result.ok);
                    let feedback = match failed {
                        Some(s) if !check.met => tool_failure_feedback(rc.registry, s),
                        _ => check.feedback,
                    };
                    let msg = Message::human(HumanKind::RewardFeedback, feedback);
                    let (r, next, fired) =
                        if check.met { (1.0, status.with(stage), vec![stage]) } else { (0.0, status, vec![]) };
                    (r, Some(msg), next, fired, check.met, submission)
                }
                Evaluator::Judge => (0.0, None, status, vec![], submission, submission),
            }
        };
        let (reward, message) = match ev {
            Evaluator::Judge => {
                let ctx = self.context(node, &[], None);
                let e = self.policy.evaluate(&ctx)?;
                self.usage.add(e.usage);
                (e.value(), Some(Message::reflection(e.reflection.clone(), e.score)))
            }
            _ => (reward, message),
        };
        let rec = &mut self.nodes[node.0];
        rec.status = status;
        rec.messages.extend(message);
        Ok(Evaluated { reward: depth_adjust(reward, depth), goal, submission, fired })
    }

    fn submission_table(&self, node: NodeId) -> Option<Arc<Table>> {
        self.path(node).into_iter().rev().find_map(|n| {
            let s = self.nodes[n.0].step.as_ref().filter(|s| s.result.ok && s.call.tool == "save_dataframe_to_csv")?;
            match &s.result.io {
                Some(IoEvent::WroteTable { table, .. }) => Some(table.clone()),
                _ => None,
            }
        })
    }
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Solved,
    NoSolutionFound,
}

/// A stage credited at a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEvent {
    pub iteration: usize,
    pub node: usize,
    pub stage: StageId,
}

/// One expansion: the node, the active subtask and the tool names offered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub node: usize,
    pub stage: Option<StageId>,
    pub exposed: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SolutionReport {
    pub algorithm: Algorithm,
    pub outcome: Outcome,
    pub reported_leaf: NodeId,
    pub best_value: f64,
    pub iterations: usize,
    /// 1-based iteration that created the first valid submission.
    pub iterations_to_solve: Option<usize>,
    pub stage_events: Vec<StageEvent>,
    pub expansions: Vec<Expansion>,
    pub subtask_solutions: Vec<(StageId, usize)>,
    /// Tool calls on the reported path with their success flags.
    pub path_calls: Vec<(String, bool)>,
    pub submission: Option<Arc<Table>>,
    pub log: TrajectoryLog,
    pub usage: Usage,
    pub node_count: usize,
}

impl SolutionReport {
    pub fn solved(&self) -> bool {
        self.outcome == Outcome::Solved
    }
}

#[derive(Default)]
struct Recorder {
    stage_events: Vec<StageEvent>,
    expansions: Vec<Expansion>,
    first_submission: Option<(usize, NodeId)>,
}

struct TreeRun {
    tree: SearchTree,
    iterations: usize,
}

struct TreeParams<'t> {
    tools: RegistryView<'t>,
    evaluator: Evaluator,
    budget: usize,
    depth_limit: usize,
    stage: Option<StageId>,
    stop_on_submission: bool,
    iteration_offset: usize,
    w: f64,
    k: usize,
}

fn run_tree(world: &mut World, seeds: &[NodeId], p: &TreeParams, rec: &mut Recorder) -> Result<TreeRun, SearchError> {
    let schemas = p.tools.export_schemas();
    let exposed = p.tools.exposed_names();
    let mut tree = SearchTree::new();
    for &s in seeds {
        tree.add_child(SearchTree::ROOT, Some(s), 0);
    }
    let mut iterations = 0;
    'outer: for it in 1..=p.budget {
        if tree.entry(SearchTree::ROOT).exhausted {
            break;
        }
        iterations = it;
        let leaf = loop {
            let mut i = SearchTree::ROOT;
            let mut stuck = None;
            while tree.entry(i).expanded {
                match tree.uct_select(i, p.w) {
                    Ok(c) => i = c,
                    Err(_) => {
                        stuck = Some(i);
                        break;
                    }
                }
            }
            match stuck {
                Some(s) => {
                    tree.mark_exhausted(s);
                    if tree.entry(SearchTree::ROOT).exhausted {
                        break 'outer;
                    }
                }
                None => break i,
            }
        };
        let node = tree.entry(leaf).node.expect("only the virtual root lacks a node");
        let depth = tree.entry(leaf).depth;
        let ctx = world.context(node, &schemas, p.stage);
        rec.expansions.push(Expansion { node: node.0, stage: p.stage, exposed: exposed.clone() });
        let proposals = world.policy.propose(&ctx, p.k)?;
        world.usage.add(proposals.usage);
        let actions: Vec<ActionProposal> = proposals.items.into_iter().filter(|a| !a.is_null()).collect();
        if actions.is_empty() {
            let e = &mut tree.entries[leaf];
            e.terminal = true;
            e.expanded = true;
            tree.mark_exhausted(leaf);
            continue;
        }
        for a in &actions {
            let child = world.execute(node, a, p.tools);
            let ev = world.evaluate(child, p.evaluator, depth + 1)?;
            let ci = tree.add_child(leaf, Some(child), depth + 1);
            tree.backpropagate(ci, ev.reward);
            for stage in ev.fired {
                rec.stage_events.push(StageEvent { iteration: p.iteration_offset + it, node: child.0, stage });
            }
            if ev.submission && rec.first_submission.is_none() {
                rec.first_submission = Some((p.iteration_offset + it, child));
            }
            let e = &mut tree.entries[ci];
            e.solution = ev.goal;
            e.terminal = ev.goal || depth + 1 >= p.depth_limit;
            if e.terminal {
                tree.mark_exhausted(ci);
            }
        }
        if p.stop_on_submission && rec.first_submission.is_some() {
            break;
        }
    }
    Ok(TreeRun { tree, iterations })
}

fn finish_report(
    world: World,
    algorithm: Algorithm,
    cfg: &SearchConfig,
    leaf: NodeId,
    best_value: f64,
    iterations: usize,
    rec: Recorder,
    subtask_solutions: Vec<(StageId, usize)>,
) -> SolutionReport {
    let solved = world.solved(leaf);
    let messages = world.messages(leaf);
    let mut logger = TrajectoryLogger::new(world.problem.clock);
    let body = messages.get(2..).unwrap_or_default();
    if algorithm == Algorithm::React {
        logger.react_messages(body);
    } else {
        logger.tree_messages(body);
    }
    let log = logger.finish(
        &world.problem.competition,
        algorithm.as_str(),
        cfg.seed,
        world.usage.total_tokens,
        world.usage.cost,
        messages.len(),
    );
    let path_calls = world
        .path(leaf)
        .into_iter()
        .filter_map(|n| world.nodes[n.0].step.as_ref().map(|s| (s.call.tool.clone(), s.result.ok)))
        .collect();
    SolutionReport {
        algorithm,
        outcome: if solved { Outcome::Solved } else { Outcome::NoSolutionFound },
        reported_leaf: leaf,
        best_value,
        iterations,
        iterations_to_solve: rec.first_submission.map(|(it, _)| it),
        stage_events: rec.stage_events,
        expansions: rec.expansions,
        subtask_solutions,
        path_calls,
        submission: if solved { world.submission_table(leaf) } else { None },
        log,
        usage: world.usage,
        node_count: world.nodes.len(),
    }
}

/// Run one planner on a problem.
pub fn run_search(
    problem: &Problem,
    policy: &dyn Policy,
    algorithm: Algorithm,
    cfg: &SearchConfig,
) -> Result<SolutionReport, SearchError> {
    cfg.validate()?;
    let mut world = World::new(problem, policy);
    match algorithm {
        Algorithm::React => react(world, cfg),
        Algorithm::Hierarchical => hierarchical(world, cfg),
        Algorithm::Lats | Algorithm::MctsOutcome | Algorithm::MctsShaped => {
            let evaluator = match algorithm {
                Algorithm::Lats => Evaluator::Judge,
                Algorithm::MctsOutcome => Evaluator::Outcome,
                _ => Evaluator::Shaped,
            };
            let registry = problem.registry;
            let params = TreeParams {
                tools: registry.full(),
                evaluator,
                budget: cfg.max_iterations,
                depth_limit: cfg.max_depth,
                stage: None,
                stop_on_submission: true,
                iteration_offset: 0,
                w: cfg.w,
                k: cfg.k,
            };
            let mut rec = Recorder::default();
            let run = run_tree(&mut world, &[ROOT_NODE], &params, &mut rec)?;
            let tree = &run.tree;
            let leaf = match rec.first_submission {
                Some((_, n)) => (1..tree.len()).find(|&i| tree.entry(i).node == Some(n)).expect("solution is in the tree"),
                None => tree.greedy_leaf(),
            };
            let node = tree.entry(leaf).node.unwrap_or(ROOT_NODE);
            let value = tree.entry(leaf).value;
            Ok(finish_report(world, algorithm, cfg, node, value, run.iterations, rec, vec![]))
        }
    }
}

fn react(mut world: World, cfg: &SearchConfig) -> Result<SolutionReport, SearchError> {
    let tools = world.problem.registry.full();
    let schemas = tools.export_schemas();
    let exposed = tools.exposed_names();
    let mut rec = Recorder::default();
    let mut node = ROOT_NODE;
    let mut iterations = 0;
    for it in 1..=cfg.max_iterations {
        iterations = it;
        let ctx = world.context(node, &schemas, None);
        rec.expansions.push(Expansion { node: node.0, stage: None, exposed: exposed.clone() });
        let proposals = world.policy.propose(&ctx, 1)?;
        world.usage.add(proposals.usage);
        let Some(action) = proposals.items.into_iter().next() else { break };
        node = world.execute(node, &action, tools);
        if action.is_null() {
            break;
        }
        if world.solved(node) {
            rec.first_submission = Some((it, node));
            break;
        }
    }
    let value = if rec.first_submission.is_some() { 1.0 } else { 0.0 };
    Ok(finish_report(world, Algorithm::React, cfg, node, value, iterations, rec, vec![]))
}

fn hierarchical(mut world: World, cfg: &SearchConfig) -> Result<SolutionReport, SearchError> {
    let registry = world.problem.registry;
    let mut rec = Recorder::default();
    let mut carried: Vec<NodeId> = vec![ROOT_NODE];
    let mut values: HashMap<NodeId, f64> = HashMap::new();
    let mut offset = 0;
    let mut counts = Vec::new();
    let mut fallback = ROOT_NODE;
    for stage in StageId::ALL {
        let tools = if cfg.masking { registry.mask(stage)? } else { registry.full() };
        let (mut solutions, todo): (Vec<NodeId>, Vec<NodeId>) =
            carried.iter().partition(|&&n| world.subtask_met(stage, n));
        if !todo.is_empty() {
            let params = TreeParams {
                tools,
                evaluator: Evaluator::Subtask(stage),
                budget: cfg.max_iterations,
                depth_limit: cfg.max_subtask_depth,
                stage: Some(stage),
                stop_on_submission: false,
                iteration_offset: offset,
                w: cfg.w,
                k: cfg.k,
            };
            let run = run_tree(&mut world, &todo, &params, &mut rec)?;
            offset += run.iterations;
            for i in run.tree.solutions() {
                let e = run.tree.entry(i);
                let n = e.node.expect("solutions are real nodes");
                values.insert(n, e.value);
                solutions.push(n);
            }
            let g = run.tree.greedy_leaf();
            fallback = run.tree.entry(g).node.unwrap_or(fallback);
        }
        counts.push((stage, solutions.len()));
        if solutions.is_empty() {
            log::info!("no solution for subtask {stage}");
            let v = 0.0;
            return Ok(finish_report(world, Algorithm::Hierarchical, cfg, fallback, v, offset, rec, counts));
        }
        carried = solutions;
    }
    let mut best = carried[0];
    for &n in &carried[1..] {
        let (vn, vb) = (values.get(&n).copied().unwrap_or(0.0), values.get(&best).copied().unwrap_or(0.0));
        if vn > vb || (vn == vb && n.0 < best.0) {
            best = n;
        }
    }
    let v = values.get(&best).copied().unwrap_or(0.0);
    Ok(finish_report(world, Algorithm::Hierarchical, cfg, best, v, offset, rec, counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uct_examples() {
        assert_eq!(uct_score(0.0, 1, 1, 1.0), 0.0);
        assert!((uct_score(0.5, 1, 2, 1.0) - (0.5 + 2f64.ln().sqrt())).abs() < 1e-15);
        assert!(uct_score(0.0, 0, 5, 1.0).is_infinite());
    }

    #[test]
    fn backprop_running_mean() {
        let mut t = SearchTree::new();
        let a = t.add_child(SearchTree::ROOT, None, 0);
        t.backpropagate(a, 0.3);
        assert!((t.entry(a).value - 0.3).abs() < 1e-15);
        let mut t = SearchTree::new();
        let a = t.add_child(SearchTree::ROOT, None, 0);
        for r in [1.0, 0.0, 1.0] {
            t.backpropagate(a, r);
        }
        assert!((t.entry(a).value - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.entry(SearchTree::ROOT).visits, 3);
    }

    #[test]
    fn unvisited_first_and_earliest_ties() {
        let mut t = SearchTree::new();
        let a = t.add_child(SearchTree::ROOT, None, 0);
        let b = t.add_child(SearchTree::ROOT, None, 0);
        for _ in 0..5 {
            t.backpropagate(a, 0.5);
        }
        assert_eq!(t.uct_select(SearchTree::ROOT, 1.0).unwrap(), b);
        t.backpropagate(b, 0.5);
        let c = t.add_child(SearchTree::ROOT, None, 0);
        assert_eq!(t.uct_select(SearchTree::ROOT, 1.0).unwrap(), c);
        t.backpropagate(c, 0.5);
        // b and c tie (one visit each, same value); b was created first
        assert_eq!(t.uct_select(SearchTree::ROOT, 1.0).unwrap(), b);
    }

    #[test]
    fn exhaustion_propagates() {
        let mut t = SearchTree::new();
        let a = t.add_child(SearchTree::ROOT, None, 0);
        let b = t.add_child(a, None, 1);
        let c = t.add_child(a, None, 1);
        t.mark_exhausted(b);
        assert!(!t.entry(a).exhausted);
        t.mark_exhausted(c);
        assert!(t.entry(a).exhausted && t.entry(SearchTree::ROOT).exhausted);
        assert!(matches!(t.uct_select(SearchTree::ROOT, 1.0), Err(SearchError::NoChildren)));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("mcts".parse::<Algorithm>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        assert!(SearchConfig { max_iterations: 0, ..Default::default() }.validate().is_err());
        assert!(SearchConfig { w: 0.0, ..Default::default() }.validate().is_err());
    }
}
