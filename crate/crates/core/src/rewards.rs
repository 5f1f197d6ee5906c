//! Stage checkers, shaped and outcome rewards, and the feedback texts shown
//! to the agent after every step.

use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use toolplan_tabular::{DType, Table};

use crate::artifact::{Artifact, ObjectKind};
use crate::message::ToolCall;
use crate::registry::{IoEvent, Registry, ToolResult, FAILURE_SUFFIX};
use crate::scratchpad::{PathView, Scratchpad};
use crate::stage::{StageId, StageSet};

pub const DEPTH_PENALTY: f64 = 0.1;
pub const STAGE_REWARD: f64 = 1.0;
pub const FEATURE_COLUMN_FLOOR: usize = 200;
pub const FEATURE_COLUMN_FACTOR: usize = 20;

/// Competition facts the checkers compare against.
#[derive(Clone, Debug, PartialEq)]
pub struct StageFacts {
    pub train_path: PathBuf,
    pub test_path: PathBuf,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Column count of the raw train file.
    pub original_columns: usize,
    pub target: String,
    pub id_column: String,
}

impl StageFacts {
    pub fn combined_rows(&self) -> usize {
        self.train_rows + self.test_rows
    }

    pub fn feature_column_bound(&self) -> usize {
        FEATURE_COLUMN_FLOOR.max(FEATURE_COLUMN_FACTOR * self.original_columns)
    }

    pub fn submission_columns(&self) -> [&str; 2] {
        [&self.id_column, &self.target]
    }
}

/// A tool call executed at a node together with its result.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub call: ToolCall,
    pub result: ToolResult,
}

/// Everything a checker may look at: the scratchpad along a root-to-node
/// path and the step executed at each node of that path.
pub struct PathState<'a> {
    pub store: &'a Scratchpad,
    pub view: &'a PathView,
    /// Aligned with `view.nodes()`; `None` for nodes without a tool call.
    pub steps: Vec<Option<&'a Step>>,
}

impl PathState<'_> {
    fn successful(&self) -> impl Iterator<Item = (usize, &Step)> + '_ {
        self.steps
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.filter(|s| s.result.ok).map(|s| (i, s)))
    }

    fn last_step(&self) -> Option<&Step> {
        self.steps.last().copied().flatten()
    }

    /// Entry named `name` written by the node at index `i` of the path.
    fn created_at(&self, i: usize, name: &str) -> Option<&Artifact> {
        let node = self.view.nodes()[i];
        self.store.pad(node).and_then(|p| p.get(name)).map(|e| &e.value)
    }

    /// The most recently created visible train/test pair.
    fn latest_pair(&self) -> Option<&Table> {
        self.store
            .visible(self.view)
            .into_iter()
            .filter(|(e, _)| e.kind == ObjectKind::TrainTestPair)
            .max_by_key(|(_, depth)| *depth)
            .and_then(|(e, _)| e.value.as_table())
    }

    /// Normalized cv scores of every model created on the path.
    fn model_scores(&self) -> Vec<f64> {
        self.view
            .nodes()
            .iter()
            .filter_map(|n| self.store.pad(*n))
            .flat_map(|p| p.entries().iter())
            .filter_map(|e| e.value.as_model())
            .filter(|m| m.cv_score.is_finite())
            .map(|m| {
                if m.is_classifier() {
                    m.cv_score
                } else {
                    1.0 / (1.0 + m.cv_score.abs())
                }
            })
            .collect()
    }
}

/// Outcome of one checker.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub met: bool,
    pub feedback: String,
}

impl Check {
    fn pass(feedback: impl Into<String>) -> Check {
        Check { met: true, feedback: feedback.into() }
    }

    fn fail(feedback: impl Into<String>) -> Check {
        Check { met: false, feedback: feedback.into() }
    }
}

fn in_progress(stage: StageId) -> &'static str {
    match stage {
        StageId::TrainDataLoading => "Train data loading is still in progress",
        StageId::TestDataLoading => "Test data loading is still in progress",
        StageId::CombineTrainTest => "Combining the train and test data is still in progress",
        StageId::DataCleaning => "Data cleaning is still in progress",
        StageId::FeatureEngineering => "Feature engineering is still in progress",
        StageId::SplitTrainTest => "Splitting the combined data into train and test is still in progress",
        StageId::TrainFeaturesTarget => "Converting the train data to features and target is still in progress",
        StageId::TestFeatures => "Converting the test data to features is still in progress",
        StageId::Modeling => "Modeling is still in progress",
        StageId::CreateSubmission => "Creating the submission is still in progress",
    }
}

fn normalize(p: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in p.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

fn same_file(a: &Path, b: &Path) -> bool {
    if normalize(a) == normalize(b) {
        return true;
    }
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn py_list(items: &[String]) -> String {
    format!("[{}]", items.iter().map(|s| format!("'{s}'")).collect::<Vec<_>>().join(", "))
}

fn check_load(stage: StageId, facts: &StageFacts, st: &PathState) -> Check {
    let (path, rows, what) = match stage {
        StageId::TrainDataLoading => (&facts.train_path, facts.train_rows, "train"),
        _ => (&facts.test_path, facts.test_rows, "test"),
    };
    for (i, s) in st.successful() {
        if s.call.tool != "read_data" {
            continue;
        }
        let Some(IoEvent::Read { path: read }) = &s.result.io else { continue };
        if !same_file(read, path) {
            continue;
        }
        let loaded = s
            .result
            .created
            .iter()
            .filter_map(|(n, _)| st.created_at(i, n))
            .filter_map(Artifact::as_table)
            .any(|t| t.n_rows() == rows);
        if loaded {
            return Check::pass(format!("Human Feedback: Verified that the {what} data was loaded successfully"));
        }
    }
    Check::fail(in_progress(stage))
}

fn check_combine(facts: &StageFacts, st: &PathState) -> Check {
    match st.latest_pair() {
        Some(t) if t.n_rows() == facts.combined_rows() => {
            Check::pass("Human Feedback: Verified that the train and test data were combined successfully")
        }
        Some(t) => Check::fail(format!(
            "{}: the combined data has {} rows, expected {} ({} train + {} test)",
            in_progress(StageId::CombineTrainTest),
            t.n_rows(),
            facts.combined_rows(),
            facts.train_rows,
            facts.test_rows
        )),
        None => Check::fail(in_progress(StageId::CombineTrainTest)),
    }
}

fn row_loss(stage: StageId, facts: &StageFacts, t: &Table) -> Option<Check> {
    (t.n_rows() != facts.combined_rows()).then(|| {
        Check::fail(format!(
            "{}: the combined data has {} rows, expected {}",
            in_progress(stage),
            t.n_rows(),
            facts.combined_rows()
        ))
    })
}

fn check_cleaning(facts: &StageFacts, st: &PathState) -> Check {
    let Some(t) = st.latest_pair() else { return Check::fail(in_progress(StageId::DataCleaning)) };
    if let Some(c) = row_loss(StageId::DataCleaning, facts, t) {
        return c;
    }
    let missing: Vec<String> = t
        .columns()
        .iter()
        .filter(|c| c.data.missing_count() > 0)
        .map(|c| c.name.clone())
        .collect();
    if missing.is_empty() {
        Check::pass("Human Feedback: Verified that no missing values (NaNs) remain in the combined data")
    } else {
        Check::fail(format!(
            "{}: {} missing values remain in columns {}",
            in_progress(StageId::DataCleaning),
            t.missing_cells(),
            py_list(&missing)
        ))
    }
}

fn check_features(facts: &StageFacts, st: &PathState) -> Check {
    let Some(t) = st.latest_pair() else { return Check::fail(in_progress(StageId::FeatureEngineering)) };
    if let Some(c) = row_loss(StageId::FeatureEngineering, facts, t) {
        return c;
    }
    let mut categorical = Vec::new();
    let mut other = Vec::new();
    for c in t.columns() {
        if c.name == facts.target {
            continue;
        }
        match c.dtype() {
            DType::Category => categorical.push(format!(
                "{{'column': '{}', 'unique_count': {}, 'dtype': 'category'}}",
                c.name,
                c.data.distinct_strings().len()
            )),
            DType::Text | DType::Datetime => other.push(format!(
                "{{'column': '{}', 'unique_count': {}, 'dtype': '{}'}}",
                c.name,
                c.data.distinct_strings().len(),
                c.dtype()
            )),
            _ => {}
        }
    }
    if !categorical.is_empty() || !other.is_empty() {
        return Check::fail(format!(
            "Categorical columns found: [{}]. Columns with dtypes that are not numeric/categorical found: [{}]. \
             Please convert these columns to numeric features before modeling, e.g. with one-hot or label encoding.",
            categorical.join(", "),
            other.join(", ")
        ));
    }
    let bound = facts.feature_column_bound();
    if t.n_cols() > bound {
        return Check::fail(format!(
            "{}: the data has {} columns, more than the allowed {bound}",
            in_progress(StageId::FeatureEngineering),
            t.n_cols()
        ));
    }
    Check::pass("Human Feedback: Verified that all features are numeric and properly encoded")
}

fn check_split(facts: &StageFacts, st: &PathState) -> Check {
    for (i, s) in st.successful() {
        if s.call.tool != "split_combined_into_train_test" {
            continue;
        }
        let rows = |name: &str| st.created_at(i, name).and_then(Artifact::as_table).map(Table::n_rows);
        if rows("train_df") == Some(facts.train_rows) && rows("test_df") == Some(facts.test_rows) {
            return Check::pass("Human Feedback: Verified that the train and test data were split successfully");
        }
    }
    Check::fail(in_progress(StageId::SplitTrainTest))
}

fn check_convert(stage: StageId, facts: &StageFacts, st: &PathState) -> Check {
    let train = stage == StageId::TrainFeaturesTarget;
    for (i, s) in st.successful() {
        if s.call.tool != "convert_dataframe_to_features_target" {
            continue;
        }
        let is_train = s.call.func_kwargs.get("is_train").and_then(|v| v.as_bool()).unwrap_or(true);
        let target_ok = s.call.func_kwargs.get("target_column").and_then(|v| v.as_str()) == Some(facts.target.as_str());
        if is_train != train || !target_ok {
            continue;
        }
        let (name, rows) = if train { ("X_train", facts.train_rows) } else { ("X_test", facts.test_rows) };
        let ok = st.created_at(i, name).and_then(Artifact::as_table).is_some_and(|t| t.n_rows() == rows)
            && (!train || st.created_at(i, "Y_train").and_then(Artifact::as_table).is_some_and(|t| t.n_rows() == rows));
        if ok {
            return Check::pass(if train {
                "Human Feedback: Verified that the train data was converted to features and target successfully"
            } else {
                "Human Feedback: Verified that the test data was converted to features successfully"
            });
        }
    }
    Check::fail(in_progress(stage))
}

fn check_modeling(st: &PathState) -> Check {
    let visible_model = st
        .store
        .visible(st.view)
        .into_iter()
        .any(|(e, _)| e.value.as_model().is_some_and(|m| m.cv_score.is_finite()));
    if visible_model {
        Check::pass("Human Feedback: Verified that the modeling was successful")
    } else {
        Check::fail(in_progress(StageId::Modeling))
    }
}

fn dtype_word(d: DType) -> &'static str {
    match d {
        DType::Bool => "boolean",
        DType::Int => "integer",
        DType::Float => "float",
        DType::Category => "category",
        DType::Text => "string",
        DType::Datetime => "datetime",
    }
}

fn submission_failure(registry: &Registry) -> String {
    let signature = registry
        .get("save_dataframe_to_csv")
        .map(|d| d.signature())
        .unwrap_or_default();
    format!(
        "Human Feedback: submission DataFrame was NOT created successfully. Please check the signature of the \
         wrapped function if any, and call it with the correct arguments. The tool signature is {signature}"
    )
}

/// Validity of a submission table against the competition facts.
pub fn submission_problem(facts: &StageFacts, t: &Table) -> Option<String> {
    if t.n_rows() != facts.test_rows {
        return Some(format!("expected {} rows, found {}", facts.test_rows, t.n_rows()));
    }
    let missing: Vec<String> = facts
        .submission_columns()
        .iter()
        .filter(|c| !t.has_column(c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Some(format!("missing required columns {}", py_list(&missing)));
    }
    if t.missing_cells() > 0 {
        return Some(format!("{} missing values", t.missing_cells()));
    }
    None
}

fn check_submission(facts: &StageFacts, registry: &Registry, st: &PathState) -> Check {
    let latest = st
        .successful()
        .filter(|(_, s)| s.call.tool == "save_dataframe_to_csv")
        .filter_map(|(_, s)| match &s.result.io {
            Some(IoEvent::WroteTable { path, table }) => Some((path, table)),
            _ => None,
        })
        .last();
    let Some((path, table)) = latest else { return Check::fail(submission_failure(registry)) };
    if submission_problem(facts, table).is_some() || !path.exists() {
        return Check::fail(submission_failure(registry));
    }
    let predicted: Vec<&str> = table
        .columns()
        .iter()
        .filter(|c| c.name != facts.id_column)
        .map(|c| dtype_word(c.dtype()))
        .collect();
    Check::pass(format!(
        "Human Feedback: Verified that the submission DataFrame was created successfully with {} columns ({}) and no missing values.",
        predicted.len(),
        predicted.join(", ")
    ))
}

/// Inputs shared by all checkers of one trial.
#[derive(Clone, Copy)]
pub struct RewardContext<'a> {
    pub facts: &'a StageFacts,
    pub registry: &'a Registry,
}

/// Run the checker of `stage` on a path.
pub fn check_stage(ctx: RewardContext, stage: StageId, st: &PathState) -> Check {
    let facts = ctx.facts;
    match stage {
        StageId::TrainDataLoading | StageId::TestDataLoading => check_load(stage, facts, st),
        StageId::CombineTrainTest => check_combine(facts, st),
        StageId::DataCleaning => check_cleaning(facts, st),
        StageId::FeatureEngineering => check_features(facts, st),
        StageId::SplitTrainTest => check_split(facts, st),
        StageId::TrainFeaturesTarget | StageId::TestFeatures => check_convert(stage, facts, st),
        StageId::Modeling => check_modeling(st),
        StageId::CreateSubmission => check_submission(facts, ctx.registry, st),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Outcome,
    Shaped,
    LlmEval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardSignal {
    pub value: f64,
    /// Stages credited at this node.
    pub fired: Vec<StageId>,
    pub feedback: String,
}

pub fn depth_adjust(r: f64, depth: usize) -> f64 {
    r - DEPTH_PENALTY * depth as f64
}

/// Feedback after a failed tool call: the error plus the tool's signature.
pub fn tool_failure_feedback(registry: &Registry, step: &Step) -> String {
    let error = step.result.message.strip_suffix(FAILURE_SUFFIX).unwrap_or(&step.result.message);
    match registry.get(&step.call.tool) {
        Some(d) => format!(
            "Human Feedback: the call to {} failed with {error}. The tool signature is {}{FAILURE_SUFFIX}",
            d.name,
            d.signature()
        ),
        None => format!("Human Feedback: {error}{FAILURE_SUFFIX}"),
    }
}

fn failed_step<'a>(st: &'a PathState) -> Option<&'a Step> {
    st.last_step().filter(|s| !s.result.ok)
}

/// Credit the lowest unmet stage if its checker passes at this node.
pub fn shaped_reward(ctx: RewardContext, status: StageSet, st: &PathState) -> (RewardSignal, StageSet) {
    let Some(stage) = status.first_unmet() else {
        return (RewardSignal { value: 0.0, fired: vec![], feedback: "Human Feedback: all stages are complete".into() }, status);
    };
    let check = check_stage(ctx, stage, st);
    if check.met {
        let value = if stage == StageId::Modeling {
            STAGE_REWARD * st.model_scores().into_iter().fold(f64::NEG_INFINITY, f64::max)
        } else {
            STAGE_REWARD
        };
        let signal = RewardSignal { value, fired: vec![stage], feedback: check.feedback };
        return (signal, status.with(stage));
    }
    let feedback = match failed_step(st) {
        Some(s) => tool_failure_feedback(ctx.registry, s),
        None => check.feedback,
    };
    (RewardSignal { value: 0.0, fired: vec![], feedback }, status)
}

/// Credit for a trained model and for a valid submission, each once.
pub fn outcome_reward(ctx: RewardContext, flags: StageSet, st: &PathState) -> (RewardSignal, StageSet) {
    let mut flags = flags;
    let mut fired = Vec::new();
    let mut texts = Vec::new();
    let mut pending = Vec::new();
    for stage in [StageId::Modeling, StageId::CreateSubmission] {
        if flags.contains(stage) {
            continue;
        }
        let check = check_stage(ctx, stage, st);
        if check.met {
            flags = flags.with(stage);
            fired.push(stage);
            texts.push(check.feedback);
        } else {
            pending.push(check.feedback);
        }
    }
    let feedback = if !texts.is_empty() {
        texts.join("\n")
    } else if let Some(s) = failed_step(st) {
        tool_failure_feedback(ctx.registry, s)
    } else {
        pending.into_iter().next().unwrap_or_else(|| "Human Feedback: the model and submission are complete".into())
    };
    (RewardSignal { value: STAGE_REWARD * fired.len() as f64, fired, feedback }, flags)
}

/// Direct success test used for early stopping and validity.
pub fn is_solved(ctx: RewardContext, st: &PathState) -> bool {
    check_stage(ctx, StageId::CreateSubmission, st).met
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_penalty_examples() {
        assert!((depth_adjust(1.0, 3) - 0.7).abs() < 1e-12);
        assert_eq!(depth_adjust(0.4, 0), 0.4);
        assert!((depth_adjust(0.0, 2) + 0.2).abs() < 1e-12);
    }

    #[test]
    fn paths_normalize() {
        assert!(same_file(Path::new("/a/./b/c.csv"), Path::new("/a/b/c.csv")));
        assert!(same_file(Path::new("/a/x/../b.csv"), Path::new("/a/b.csv")));
        assert!(!same_file(Path::new("/a/b.csv"), Path::new("/a/c.csv")));
    }
}
