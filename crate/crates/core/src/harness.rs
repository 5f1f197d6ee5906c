//! Benchmark harness: task prompts, trials, submission scoring, leaderboard
//! percentiles and aggregate reports.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toolplan_tabular::csvio::{read_csv, write_csv};
use toolplan_tabular::metrics;
use toolplan_tabular::{Table, Value};

use crate::competition::{prepare_splits, Competition, CompetitionError, CompetitionSpec, Layout, Metric, PreparedData};
use crate::llm::{LlmConfig, LlmPolicy};
use crate::playbook::{golden_playbook, PlaybookSpec};
use crate::policy::{Policy, ScriptedPolicy};
use crate::registry::{Registry, ToolEnv};
use crate::rewards::StageFacts;
use crate::search::{run_search, Algorithm, Problem, SearchConfig, SearchError};
use crate::trajlog::ClockKind;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Competition(#[from] CompetitionError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
}

/// Which policy drives the planners.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyChoice {
    /// The golden playbook with an ε chance of a random exposed tool per draw.
    Scripted { epsilon: f64 },
    Llm(LlmConfig),
}

impl PolicyChoice {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyChoice::Scripted { .. } => "scripted",
            PolicyChoice::Llm(_) => "llm",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrialSettings {
    pub algorithm: Algorithm,
    pub policy: PolicyChoice,
    pub search: SearchConfig,
    pub trials: usize,
    /// Trial `i` runs with seed `base_seed + i`.
    pub base_seed: u64,
    pub out_dir: PathBuf,
    /// Where downloaded competition files live.
    pub data_dir: PathBuf,
    pub clock: ClockKind,
}

/// The task prompt handed to every planner.
pub fn task_prompt(spec: &CompetitionSpec, layout: &Layout, submission: &str) -> String {
    let mut s = String::new();
    s.push_str(spec.description.trim());
    s.push_str("\n\nFile and Data Field Descriptions\n");
    for f in &spec.fields {
        let _ = writeln!(s, "- {}: {}", f.name, f.description);
    }
    s.push_str("\nSubmission File Format\n");
    for c in &spec.submission {
        let _ = writeln!(s, "- {} ({}): {}", c.name, c.dtype, c.description);
    }
    s.push_str("\nBenchmark Instructions\n");
    let bullets = [
        format!("The training data is located at {}.", layout.train),
        format!("The test data is located at {}.", layout.test),
        "Load, clean, and perform feature engineering before fitting models.".to_string(),
        "Concatenate train and test datasets before preprocessing to ensure consistent transformations, then split back."
            .to_string(),
        "Experiment with multiple models and hyperparameter tuning to find the best-performing solution.".to_string(),
        "Report evaluation results demonstrating model fit.".to_string(),
        format!("Save the best model to {}.", layout.model_dir),
        format!("Save predictions for the test set in CSV format to {submission}."),
    ];
    for b in bullets {
        let _ = writeln!(s, "- {b}");
    }
    s
}

/// Validity and metric value of one submission file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmissionScore {
    pub valid: bool,
    pub score: Option<f64>,
    pub problem: Option<String>,
}

impl SubmissionScore {
    fn invalid(problem: impl Into<String>) -> SubmissionScore {
        SubmissionScore { valid: false, score: None, problem: Some(problem.into()) }
    }
}

fn same_label(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a.render() == b.render(),
    }
}

fn is_positive(v: &Value) -> bool {
    match v {
        Value::Bool(b) => *b,
        Value::Str(s) => matches!(s.to_ascii_lowercase().as_str(), "true" | "1" | "yes" | "1.0"),
        other => other.as_f64() == Some(1.0),
    }
}

/// Check a submission file against the private labels and compute its metric.
pub fn score_submission(spec: &CompetitionSpec, labels: &Table, path: &Path) -> SubmissionScore {
    if !path.exists() {
        return SubmissionScore::invalid("submission file does not exist");
    }
    let sub = match read_csv(path) {
        Ok(t) => t,
        Err(e) => return SubmissionScore::invalid(format!("submission could not be read: {e}")),
    };
    if sub.n_rows() != labels.n_rows() {
        return SubmissionScore::invalid(format!("submission has {} rows, expected {}", sub.n_rows(), labels.n_rows()));
    }
    let (Ok(ids), Ok(preds)) = (sub.column(&spec.id_column), sub.column(&spec.target)) else {
        return SubmissionScore::invalid(format!("submission needs columns {} and {}", spec.id_column, spec.target));
    };
    if ids.data.missing_count() > 0 || preds.data.missing_count() > 0 {
        return SubmissionScore::invalid("submission has missing values");
    }
    let mut by_id: HashMap<String, usize> = HashMap::with_capacity(sub.n_rows());
    for (i, id) in ids.data.to_strings().into_iter().enumerate() {
        if by_id.insert(id.expect("no missing ids"), i).is_some() {
            return SubmissionScore::invalid("submission has duplicate ids");
        }
    }
    let label_ids = labels.column(&spec.id_column).expect("labels carry the id").data.to_strings();
    let truth_col = &labels.column(&spec.target).expect("labels carry the target").data;
    let mut truth = Vec::with_capacity(label_ids.len());
    let mut pred = Vec::with_capacity(label_ids.len());
    for (i, id) in label_ids.iter().enumerate() {
        let Some(&j) = id.as_ref().and_then(|id| by_id.get(id)) else {
            return SubmissionScore::invalid(format!("submission is missing id {}", id.as_deref().unwrap_or("")));
        };
        truth.push(truth_col.get(i).expect("labels are complete"));
        pred.push(preds.data.get(j).expect("no missing predictions"));
    }
    match metric_value(spec.metric, &truth, &pred) {
        Ok(v) => SubmissionScore { valid: true, score: Some(v), problem: None },
        Err(p) => SubmissionScore::invalid(p),
    }
}

fn metric_value(metric: Metric, truth: &[Value], pred: &[Value]) -> Result<f64, String> {
    let floats = |vs: &[Value]| -> Result<Vec<f64>, String> {
        vs.iter().map(|v| v.as_f64().ok_or_else(|| format!("non-numeric prediction `{}`", v.render()))).collect()
    };
    Ok(match metric {
        Metric::Rmse | Metric::Mae | Metric::Rmsle => {
            let (t, p) = (floats(truth)?, floats(pred)?);
            match metric {
                Metric::Rmse => metrics::rmse(&t, &p),
                Metric::Mae => metrics::mae(&t, &p),
                _ => {
                    if p.iter().chain(&t).any(|v| *v <= -1.0) {
                        return Err("rmsle needs values above -1".into());
                    }
                    metrics::rmsle(&t, &p)
                }
            }
        }
        Metric::Accuracy => {
            truth.iter().zip(pred).filter(|(t, p)| same_label(t, p)).count() as f64 / truth.len().max(1) as f64
        }
        Metric::F1 => {
            let classes: Vec<String> =
                truth.iter().map(Value::render).collect::<BTreeSet<_>>().into_iter().collect();
            let index = |v: &Value| {
                classes.iter().position(|c| same_label(&Value::Str(c.clone()), v) || *c == v.render())
            };
            let t: Vec<usize> = truth.iter().map(|v| index(v).expect("truth class")).collect();
            let p: Vec<usize> = pred.iter().map(|v| index(v).unwrap_or(classes.len())).collect();
            metrics::f1(&t, &p, classes.len().max(2))
        }
        Metric::Auc => {
            let positive: Vec<bool> = truth.iter().map(is_positive).collect();
            let score = floats(pred)?;
            metrics::roc_auc(&positive, &score).ok_or("auc needs both classes in the labels")?
        }
    })
}

/// Percentage of leaderboard entries strictly worse than `score`.
pub fn leaderboard_percentile(board: &[f64], score: f64, higher_is_better: bool) -> Result<f64, CompetitionError> {
    if board.is_empty() {
        return Err(CompetitionError::EmptyLeaderboard);
    }
    let worse =
        board.iter().filter(|&&b| if higher_is_better { b < score } else { b > score }).count();
    Ok(100.0 * worse as f64 / board.len() as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 0 { (v[m - 1] + v[m]) / 2.0 } else { v[m] })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub solved: bool,
    pub valid: bool,
    pub score: Option<f64>,
    /// Leaderboard percentile, 0 for an invalid submission.
    pub percentile: f64,
    pub iterations: usize,
    pub iterations_to_solve: Option<usize>,
    pub problem: Option<String>,
    pub error: Option<String>,
    pub total_tokens: u64,
    pub cost: f64,
    pub submission: String,
    pub log: String,
}

impl TrialResult {
    /// A trial that produced nothing scoreable.
    pub fn failed(seed: u64, error: impl Into<String>) -> TrialResult {
        TrialResult {
            seed,
            solved: false,
            valid: false,
            score: None,
            percentile: 0.0,
            iterations: 0,
            iterations_to_solve: None,
            problem: None,
            error: Some(error.into()),
            total_tokens: 0,
            cost: 0.0,
            submission: String::new(),
            log: String::new(),
        }
    }
}

/// Aggregate of one (competition, algorithm) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompetitionReport {
    pub competition: String,
    pub algorithm: String,
    pub policy: String,
    pub metric: String,
    pub trials: usize,
    pub valid: usize,
    pub consistency: f64,
    pub median_percentile: f64,
    pub mean_percentile: f64,
    pub std_percentile: f64,
    pub results: Vec<TrialResult>,
}

pub fn summarize(competition: &str, algorithm: &str, policy: &str, metric: &str, results: Vec<TrialResult>) -> CompetitionReport {
    let trials = results.len();
    let valid = results.iter().filter(|r| r.valid).count();
    let pct: Vec<f64> = results.iter().map(|r| if r.valid { r.percentile } else { 0.0 }).collect();
    let (mean, std) = mean_std(&pct);
    CompetitionReport {
        competition: competition.to_string(),
        algorithm: algorithm.to_string(),
        policy: policy.to_string(),
        metric: metric.to_string(),
        trials,
        valid,
        consistency: if trials == 0 { 0.0 } else { valid as f64 / trials as f64 },
        median_percentile: median(&pct).unwrap_or(0.0),
        mean_percentile: mean,
        std_percentile: std,
        results,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<CompetitionReport>,
}

impl BenchmarkReport {
    pub fn median_consistency(&self) -> f64 {
        median(&self.rows.iter().map(|r| r.consistency).collect::<Vec<_>>()).unwrap_or(0.0)
    }

    pub fn median_percentile(&self) -> f64 {
        median(&self.rows.iter().map(|r| r.median_percentile).collect::<Vec<_>>()).unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut s = format!(
            "{:<24} {:<14} {:<9} {:>7} {:>11} {:>10} {:>10} {:>9}\n",
            "competition", "algorithm", "policy", "valid", "consistency", "median_pct", "mean_pct", "std_pct"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<24} {:<14} {:<9} {:>7} {:>11.3} {:>10.2} {:>10.2} {:>9.2}",
                r.competition,
                r.algorithm,
                r.policy,
                format!("{}/{}", r.valid, r.trials),
                r.consistency,
                r.median_percentile,
                r.mean_percentile,
                r.std_percentile
            );
        }
        if self.rows.len() > 1 {
            let _ = writeln!(
                s,
                "overall: median consistency {:.3}, median percentile {:.2}",
                self.median_consistency(),
                self.median_percentile()
            );
        }
        s
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// A competition with its split written and leaderboard loaded.
#[derive(Debug)]
pub struct PreparedCompetition {
    pub competition: Competition,
    pub data: PreparedData,
    pub leaderboard: Vec<f64>,
}

pub fn prepare(competition: Competition, out_dir: &Path, data_dir: &Path) -> Result<PreparedCompetition, HarnessError> {
    let source = competition.load_source(data_dir)?;
    let leaderboard = competition.leaderboard(data_dir)?;
    let data = prepare_splits(&competition.spec, &source, out_dir)?;
    Ok(PreparedCompetition { competition, data, leaderboard })
}

/// Run one seeded trial end to end: search, canonical submission, log, score.
pub fn run_trial(
    prepared: &PreparedCompetition,
    registry: &Registry,
    settings: &TrialSettings,
    seed: u64,
) -> Result<TrialResult, HarnessError> {
    let spec = &prepared.competition.spec;
    let layout = &prepared.data.layout;
    let out = &settings.out_dir;
    let alg = settings.algorithm.as_str();
    let submission_rel = Layout::submission(&spec.name, alg, seed);
    let log_rel = Layout::log(&spec.name, alg, seed);
    let submission_path = out.join(&submission_rel);

    let env = ToolEnv {
        workdir: out.clone(),
        seed,
        target: Some(spec.target.clone()),
        id_column: Some(spec.id_column.clone()),
        test_ids: Some(prepared.data.test_ids.clone()),
    };
    let facts = StageFacts {
        train_path: out.join(&layout.train),
        test_path: out.join(&layout.test),
        train_rows: prepared.data.train_rows,
        test_rows: prepared.data.test_rows,
        original_columns: prepared.data.original_columns,
        target: spec.target.clone(),
        id_column: spec.id_column.clone(),
    };
    let problem = Problem {
        competition: spec.name.clone(),
        registry,
        env,
        facts,
        task_prompt: task_prompt(spec, layout, &submission_rel),
        clock: settings.clock,
    };
    let policy: Box<dyn Policy> = match &settings.policy {
        PolicyChoice::Scripted { epsilon } => {
            let playbook = golden_playbook(&PlaybookSpec {
                train_path: layout.train.clone(),
                test_path: layout.test.clone(),
                submission_path: submission_rel.clone(),
                target: spec.target.clone(),
                id_column: spec.id_column.clone(),
                classification: spec.task.is_classification(),
                categorical: prepared.data.categorical.clone(),
            });
            Box::new(ScriptedPolicy::new(playbook, *epsilon, seed))
        }
        PolicyChoice::Llm(cfg) => Box::new(LlmPolicy::new(cfg.clone())),
    };
    let cfg = SearchConfig { seed, ..settings.search.clone() };
    let report = run_search(&problem, policy.as_ref(), settings.algorithm, &cfg)?;

    if let Some(parent) = submission_path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    match (&report.submission, report.solved()) {
        (Some(table), true) => write_csv(table, &submission_path)
            .map_err(|e| HarnessError::Invalid(format!("writing {}: {e}", submission_path.display())))?,
        _ => {
            if submission_path.exists() {
                fs::remove_file(&submission_path).map_err(io_err(&submission_path))?;
            }
        }
    }
    let log_path = out.join(&log_rel);
    if let Some(parent) = log_path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let log_text = serde_json::to_string_pretty(&report.log).expect("log serializes");
    fs::write(&log_path, log_text).map_err(io_err(&log_path))?;

    let scored = score_submission(spec, &prepared.data.labels, &submission_path);
    let percentile = match scored.score {
        Some(s) if scored.valid => leaderboard_percentile(&prepared.leaderboard, s, spec.higher_is_better)?,
        _ => 0.0,
    };
    Ok(TrialResult {
        seed,
        solved: report.solved(),
        valid: scored.valid,
        score: scored.score,
        percentile,
        iterations: report.iterations,
        iterations_to_solve: report.iterations_to_solve,
        problem: scored.problem,
        error: None,
        total_tokens: report.usage.total_tokens,
        cost: report.usage.cost,
        submission: submission_rel,
        log: log_rel,
    })
}

/// Run all trials of one competition in parallel and aggregate them.
pub fn run_trials(
    prepared: &PreparedCompetition,
    registry: &Registry,
    settings: &TrialSettings,
) -> Result<CompetitionReport, HarnessError> {
    settings.search.validate()?;
    let seeds: Vec<u64> = (0..settings.trials as u64).map(|i| settings.base_seed + i).collect();
    let run = |&seed: &u64| match run_trial(prepared, registry, settings, seed) {
        Ok(r) => Ok(r),
        Err(HarnessError::Search(SearchError::Policy(e))) => {
            log::error!("trial {seed} failed: {e}");
            Ok(TrialResult::failed(seed, e.to_string()))
        }
        Err(e) => Err(e),
    };
    let results: Vec<TrialResult> = if matches!(settings.policy, PolicyChoice::Llm(_)) {
        seeds.iter().map(run).collect::<Result<_, _>>()?
    } else {
        seeds.par_iter().map(run).collect::<Result<_, _>>()?
    };
    let spec = &prepared.competition.spec;
    Ok(summarize(&spec.name, settings.algorithm.as_str(), settings.policy.name(), spec.metric.as_str(), results))
}

/// Write a report as JSON and text under `out_dir/reports/`.
pub fn write_report(report: &BenchmarkReport, out_dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf), HarnessError> {
    let dir = out_dir.join("reports");
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let json = dir.join(format!("{stem}.json"));
    let text = dir.join(format!("{stem}.txt"));
    fs::write(&json, report.to_json()).map_err(io_err(&json))?;
    fs::write(&text, report.render_text()).map_err(io_err(&text))?;
    Ok((json, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(valid: bool, percentile: f64) -> TrialResult {
        TrialResult { valid, percentile, ..TrialResult::failed(0, "") }
    }

    #[test]
    fn percentile_counts_strictly_worse() {
        let board = [0.5, 0.6, 0.7, 0.8];
        assert_eq!(leaderboard_percentile(&board, 0.7, true).unwrap(), 50.0);
        assert_eq!(leaderboard_percentile(&board, 0.7, false).unwrap(), 25.0);
        assert!(matches!(leaderboard_percentile(&[], 1.0, true), Err(CompetitionError::EmptyLeaderboard)));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn invalid_trials_count_as_zero() {
        let r = summarize("c", "react", "scripted", "accuracy", vec![trial(true, 80.0), trial(false, 99.0)]);
        assert_eq!(r.consistency, 0.5);
        assert_eq!(r.median_percentile, 40.0);
        assert_eq!(r.std_percentile, 40.0);
    }

    #[test]
    fn prompt_lists_paths() {
        let spec = &crate::competition::bundled()[0];
        let layout = Layout::new(&spec.name);
        let p = task_prompt(spec, &layout, "submissions/x/react/trial_0.csv");
        assert!(p.contains("The training data is located at data/synthetic_spaceship/train.csv."));
        assert!(p.contains("in CSV format to submissions/x/react/trial_0.csv."));
        assert!(p.contains("Submission File Format\n- PassengerId (object)"));
    }
}
