//! Acceptance suite: one line per criterion, non-zero exit when any fails.
//! Run with `cargo test -p toolplan-core --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toolplan_core::competition::Layout;
use toolplan_core::harness::{run_trials, summarize, PolicyChoice, TrialResult, TrialSettings};
use toolplan_core::playbook::{golden_playbook, PlaybookSpec};
use toolplan_core::policy::{Evaluation, Policy, PolicyError, Proposals, ScriptedPolicy, TrajectoryContext};
use toolplan_core::rewards::StageFacts;
use toolplan_core::search::{run_search, uct_score, Algorithm, Problem, SearchConfig, SearchTree};
use toolplan_core::trajlog::{validate_log, ClockKind};
use toolplan_core::{Artifact, NodeId, NodePad, PathView, Registry, Scratchpad, StageId, ToolEnv};
use toolplan_tabular::csvio::{read_csv_from, write_csv_to};
use toolplan_tabular::expr::{self, BinOp, Expr, Series};
use toolplan_tabular::{metrics, ops, Column, ColumnData, Table};

use common::*;

const V_TOL: f64 = 1e-12;
const UCT_TOL: f64 = 1e-5;
const METRIC_TOL: f64 = 1e-9;
const BINARY: &str = "synthetic_spaceship";
const NOISE: f64 = 0.3;
const PAIRED_SEEDS: u64 = 20;
/// Flat MCTS needs far more than the default 50 iterations to finish the
/// 14-step pipeline under noise.
const FLAT_BUDGET: usize = 1000;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 -------------------------------------------------------------------------

fn trial(valid: bool, percentile: f64) -> TrialResult {
    TrialResult { valid, percentile, ..TrialResult::failed(0, "") }
}

fn consistency_formula() -> Check {
    let four: Vec<TrialResult> = (0..10).map(|i| trial(i < 4, 90.0)).collect();
    let r = summarize("c", "a", "scripted", "accuracy", four);
    ensure(r.consistency == 0.4, || format!("4/10 gave {}", r.consistency))?;
    let none: Vec<TrialResult> = (0..10).map(|_| trial(false, 75.0)).collect();
    let r = summarize("c", "a", "scripted", "accuracy", none);
    ensure(r.consistency == 0.0 && r.median_percentile == 0.0, || {
        format!("0/10 gave consistency {} median {}", r.consistency, r.median_percentile)
    })?;
    Ok("4/10 -> 0.4, 0/10 -> median percentile 0".into())
}

// 2 -------------------------------------------------------------------------

fn oracle_uct(v: f64, n: u32, np: u32, w: f64) -> f64 {
    v + w * ((np as f64).ln() / n as f64).sqrt()
}

fn mcts_bookkeeping() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0usize;
    for _ in 0..200 {
        let n = rng.random_range(1..=100usize);
        let mut tree = SearchTree::new();
        let mut parent = vec![None];
        for i in 1..=n {
            let p = rng.random_range(0..i);
            tree.add_child(p, Some(NodeId(i)), 0);
            parent.push(Some(p));
        }
        let mut streams: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
        for _ in 0..rng.random_range(0..4 * n) {
            let leaf = rng.random_range(1..=n);
            let r: f64 = rng.random_range(-1.0..2.0);
            tree.backpropagate(leaf, r);
            let mut cur = Some(leaf);
            while let Some(i) = cur {
                streams[i].push(r);
                cur = parent[i];
            }
        }
        for (i, s) in streams.iter().enumerate() {
            let e = tree.entry(i);
            ensure(e.visits as usize == s.len(), || format!("node {i}: {} visits, oracle {}", e.visits, s.len()))?;
            if !s.is_empty() {
                let mean = s.iter().sum::<f64>() / s.len() as f64;
                ensure((e.value - mean).abs() <= V_TOL, || format!("node {i}: V {} oracle {mean}", e.value))?;
            }
            checked += 1;
        }
        let w = rng.random_range(0.1..3.0);
        for p in 0..=n {
            let kids = &tree.entry(p).children;
            if kids.is_empty() {
                continue;
            }
            let got = tree.uct_select(p, w).map_err(|e| e.to_string())?;
            let np = tree.entry(p).visits;
            let score = |c: usize| {
                let e = tree.entry(c);
                if e.visits == 0 {
                    f64::INFINITY
                } else {
                    oracle_uct(e.value, e.visits, np, w)
                }
            };
            let best = kids.iter().map(|&c| score(c)).fold(f64::NEG_INFINITY, f64::max);
            ensure(score(got) == best && kids.contains(&got), || format!("parent {p}: picked {got}, not an argmax"))?;
        }
    }
    Ok(format!("{checked} node means within {V_TOL:e}, every selection an argmax"))
}

// 3 -------------------------------------------------------------------------

fn uct_spot_value() -> Check {
    let got = uct_score(0.5, 1, 2, 1.0);
    let oracle = 0.5 + 2f64.ln().sqrt();
    ensure((got - 1.33255).abs() <= UCT_TOL && (got - oracle).abs() <= 1e-15, || format!("got {got}"))?;
    Ok(format!("uct(0.5, 1, 2, 1) = {got:.6}"))
}

// 4 -------------------------------------------------------------------------

const NAMES: [&str; 8] = ["df", "train", "test", "model", "x", "y", "pred", "sub"];

fn scalar(e: &toolplan_core::scratchpad::Entry) -> f64 {
    match e.value {
        Artifact::Scalar(v) => v,
        _ => unreachable!(),
    }
}

fn resolutions(pad: &Scratchpad, view: &PathView) -> Vec<Option<(u64, String)>> {
    NAMES
        .iter()
        .map(|n| pad.resolve(view, n).ok().map(|e| (scalar(e).to_bits(), e.created_by.clone())))
        .collect()
}

fn scratchpad_laws() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut paths = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=40usize);
        let mut parent: Vec<Option<usize>> = vec![None];
        for i in 1..n {
            parent.push(Some(rng.random_range(0..i)));
        }
        let path_of = |i: usize| {
            let mut p = vec![i];
            let mut cur = parent[i];
            while let Some(j) = cur {
                p.push(j);
                cur = parent[j];
            }
            p.reverse();
            p
        };
        let mut writes: Vec<BTreeMap<&str, f64>> = Vec::new();
        let mut store = Scratchpad::default();
        let mut before: HashMap<usize, Vec<Option<(u64, String)>>> = HashMap::new();
        for i in 0..n {
            let mut pad = NodePad::new();
            let mut w = BTreeMap::new();
            for name in NAMES {
                if rng.random_bool(0.3) {
                    let v: f64 = rng.random_range(-1e3..1e3);
                    pad.put(name, Artifact::Scalar(v), &format!("node{i}")).map_err(|e| e.to_string())?;
                    w.insert(name, v);
                }
            }
            writes.push(w);
            store.insert(NodeId(i), pad);
            // Ancestors are fixed once written; later writes are all descendants or siblings.
            for (&j, snapshot) in &before {
                let view = PathView::from_path(path_of(j).into_iter().map(NodeId).collect());
                ensure(&resolutions(&store, &view) == snapshot, || format!("node {j} changed after writing {i}"))?;
            }
            let view = PathView::from_path(path_of(i).into_iter().map(NodeId).collect());
            before.insert(i, resolutions(&store, &view));
        }
        for i in 0..n {
            let path = path_of(i);
            let mut union: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
            for &j in &path {
                for (&k, &v) in &writes[j] {
                    union.insert(k, (v, j));
                }
            }
            let view = PathView::from_path(path.iter().copied().map(NodeId).collect());
            for name in NAMES {
                let got = store.resolve(&view, name).ok().map(|e| (scalar(e).to_bits(), e.created_by.clone()));
                let want = union.get(name).map(|(v, j)| (v.to_bits(), format!("node{j}")));
                ensure(got == want, || format!("node {i} name {name}: {got:?} vs oracle {want:?}"))?;
            }
            let avail: Vec<String> = union.keys().map(|k| k.to_string()).collect();
            ensure(store.available(&view) == avail, || format!("node {i}: available names differ"))?;
            paths += 1;
        }
    }
    Ok(format!("{paths} paths match the union oracle; ancestors unchanged"))
}

// 5 -------------------------------------------------------------------------

fn random_table(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Table {
    let columns = (0..cols)
        .map(|c| {
            let present = |rng: &mut ChaCha8Rng, r: usize| r == 0 || rng.random_bool(0.85);
            let data = match c % 4 {
                0 => ColumnData::Int((0..rows).map(|r| present(rng, r).then(|| rng.random_range(-500..500))).collect()),
                1 => ColumnData::Float(
                    (0..rows).map(|r| present(rng, r).then(|| rng.random_range(-1e4..1e4) + 0.25)).collect(),
                ),
                2 => ColumnData::Bool((0..rows).map(|r| present(rng, r).then(|| rng.random_bool(0.5))).collect()),
                _ => ColumnData::Text(
                    (0..rows)
                        .map(|r| {
                            present(rng, r).then(|| {
                                let len = rng.random_range(1..6);
                                (0..len).map(|_| ['q', 'w', 'z', ' ', ',', '"', 'k'][rng.random_range(0..7)]).collect::<String>()
                            })
                        })
                        .map(|s| s.map(|s: String| format!("v{s}")))
                        .collect(),
                ),
            };
            Column::new(format!("c{c}"), data)
        })
        .collect();
    Table::new(columns).unwrap()
}

fn toolkit_round_trips() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in 0..100 {
        let cols = rng.random_range(1..=8usize);
        let max_rows = (1000 / cols / 2).max(1);
        let (train_rows, test_rows) = (rng.random_range(1..=max_rows), rng.random_range(1..=max_rows));
        let train = random_table(&mut rng, train_rows, cols);
        let test = random_table(&mut rng, test_rows, cols);
        let combined = ops::concatenate_train_test(&train, &test).map_err(|e| e.to_string())?;
        let (a, b) = ops::split_combined(&combined).map_err(|e| e.to_string())?;
        ensure(a == train && b == test, || format!("table {t}: concat/split changed content"))?;
        let mut buf = Vec::new();
        write_csv_to(&train, &mut buf).map_err(|e| e.to_string())?;
        let back = read_csv_from(buf.as_slice()).map_err(|e| e.to_string())?;
        ensure(back == train, || format!("table {t}: csv round trip changed content"))?;
    }
    let rmse = metrics::rmse(&[0.0, 0.0], &[5.0, 0.0]);
    ensure((rmse - 12.5f64.sqrt()).abs() <= METRIC_TOL, || format!("rmse {rmse}"))?;
    let acc = metrics::accuracy(&[1, 2, 3], &[1, 2, 4]);
    ensure((acc - 2.0 / 3.0).abs() <= METRIC_TOL, || format!("accuracy {acc}"))?;
    Ok("100 tables round-trip exactly; rmse = sqrt(12.5), accuracy = 2/3".into())
}

// 6 -------------------------------------------------------------------------

fn simple_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    // Plain split is enough for the bundled files: no quoted fields.
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    (header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn column_of(path: &Path, name: &str) -> Vec<String> {
    let (header, rows) = simple_rows(path);
    let i = header.iter().position(|h| h == name).unwrap();
    rows.into_iter().map(|r| r[i].clone()).collect()
}

fn golden_end_to_end() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let registry = Registry::with_catalog().unwrap();
    let p = prepared(BINARY, out);
    let mut s = settings(out, Algorithm::React, PolicyChoice::Scripted { epsilon: 0.0 }, SearchConfig::default());
    s.trials = 10;
    let report = run_trials(&p, &registry, &s).map_err(|e| e.to_string())?;
    ensure(report.consistency == 1.0, || format!("consistency {}", report.consistency))?;

    let spec = &p.competition.spec;
    let train_target = column_of(&out.join(&p.data.layout.train), &spec.target);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in train_target.iter().filter(|v| !v.is_empty()) {
        *counts.entry(v).or_default() += 1;
    }
    let majority = counts.iter().max_by_key(|(_, c)| **c).map(|(k, _)| k.to_string()).unwrap();
    let label_path = out.join(&p.data.layout.labels);
    let truth: HashMap<String, String> =
        column_of(&label_path, &spec.id_column).into_iter().zip(column_of(&label_path, &spec.target)).collect();
    let baseline = truth.values().filter(|v| **v == majority).count() as f64 / truth.len() as f64;
    let mut worst = f64::INFINITY;
    for r in &report.results {
        let sub = out.join(&r.submission);
        let ids = column_of(&sub, &spec.id_column);
        let preds = column_of(&sub, &spec.target);
        let hits = ids.iter().zip(&preds).filter(|(id, p)| truth.get(*id) == Some(*p)).count();
        let acc = hits as f64 / truth.len() as f64;
        ensure(ids.len() == truth.len(), || format!("seed {}: {} rows", r.seed, ids.len()))?;
        ensure(acc > baseline, || format!("seed {}: accuracy {acc} <= majority baseline {baseline}", r.seed))?;
        worst = worst.min(acc);
    }

    let k1 = SearchConfig { k: 1, ..SearchConfig::default() };
    let s = settings(out, Algorithm::MctsShaped, PolicyChoice::Scripted { epsilon: 0.0 }, k1.clone());
    let problem = problem_for(&p, &registry, &s, 0);
    let policy = scripted_policy(&p, Algorithm::MctsShaped, 0, 0.0);
    let rep = run_search(&problem, &policy, Algorithm::MctsShaped, &k1).map_err(|e| e.to_string())?;
    let fired: Vec<StageId> = rep.stage_events.iter().map(|e| e.stage).collect();
    ensure(fired == StageId::ALL, || format!("stages fired {fired:?}"))?;
    Ok(format!("10/10 valid, min accuracy {worst:.3} > baseline {baseline:.3}, 10 stages in order"))
}

fn problem_for<'a>(p: &'a toolplan_core::harness::PreparedCompetition, registry: &'a Registry, s: &TrialSettings, seed: u64) -> Problem<'a> {
    let spec = &p.competition.spec;
    let layout = &p.data.layout;
    let submission = Layout::submission(&spec.name, s.algorithm.as_str(), seed);
    Problem {
        competition: spec.name.clone(),
        registry,
        env: ToolEnv {
            workdir: s.out_dir.clone(),
            seed,
            target: Some(spec.target.clone()),
            id_column: Some(spec.id_column.clone()),
            test_ids: Some(p.data.test_ids.clone()),
        },
        facts: StageFacts {
            train_path: s.out_dir.join(&layout.train),
            test_path: s.out_dir.join(&layout.test),
            train_rows: p.data.train_rows,
            test_rows: p.data.test_rows,
            original_columns: p.data.original_columns,
            target: spec.target.clone(),
            id_column: spec.id_column.clone(),
        },
        task_prompt: toolplan_core::harness::task_prompt(spec, layout, &submission),
        clock: ClockKind::Logical,
    }
}

fn scripted_policy(p: &toolplan_core::harness::PreparedCompetition, alg: Algorithm, seed: u64, epsilon: f64) -> ScriptedPolicy {
    let spec = &p.competition.spec;
    let layout = &p.data.layout;
    ScriptedPolicy::new(
        golden_playbook(&PlaybookSpec {
            train_path: layout.train.clone(),
            test_path: layout.test.clone(),
            submission_path: Layout::submission(&spec.name, alg.as_str(), seed),
            target: spec.target.clone(),
            id_column: spec.id_column.clone(),
            classification: spec.task.is_classification(),
            categorical: p.data.categorical.clone(),
        }),
        epsilon,
        seed,
    )
}

// 7 -------------------------------------------------------------------------

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

fn shaping_helps() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let registry = Registry::with_catalog().unwrap();
    let p = prepared(BINARY, out);
    let mut medians = Vec::new();
    let mut solved = Vec::new();
    for alg in [Algorithm::MctsShaped, Algorithm::MctsOutcome] {
        let cfg = SearchConfig { max_iterations: FLAT_BUDGET, ..SearchConfig::default() };
        let mut s = settings(out, alg, PolicyChoice::Scripted { epsilon: NOISE }, cfg);
        s.trials = PAIRED_SEEDS as usize;
        let report = run_trials(&p, &registry, &s).map_err(|e| e.to_string())?;
        // Unsolved trials are censored at budget + 1.
        let its: Vec<f64> =
            report.results.iter().map(|r| r.iterations_to_solve.unwrap_or(FLAT_BUDGET + 1) as f64).collect();
        solved.push(report.results.iter().filter(|r| r.iterations_to_solve.is_some()).count());
        medians.push(median(its));
    }
    ensure(solved[0] > 0, || "no shaped trial solved, comparison would be vacuous".into())?;
    ensure(medians[0] <= medians[1], || format!("shaped median {} > outcome median {}", medians[0], medians[1]))?;
    Ok(format!(
        "median iterations to first submission: shaped {} ({}/20 solved), outcome {} ({}/20 solved)",
        medians[0], solved[0], medians[1], solved[1]
    ))
}

// 8 -------------------------------------------------------------------------

/// Records the stage and tool names of every proposal request.
struct Recording<P> {
    inner: P,
    seen: Mutex<Vec<(Option<StageId>, BTreeSet<String>)>>,
}

impl<P: Policy> Policy for Recording<P> {
    fn propose(&self, ctx: &TrajectoryContext, k: usize) -> Result<Proposals, PolicyError> {
        let names = ctx.tools.iter().map(|t| t["function"]["name"].as_str().unwrap().to_string()).collect();
        self.seen.lock().unwrap().push((ctx.stage, names));
        self.inner.propose(ctx, k)
    }

    fn evaluate(&self, ctx: &TrajectoryContext) -> Result<Evaluation, PolicyError> {
        self.inner.evaluate(ctx)
    }

    fn is_remote(&self) -> bool {
        false
    }
}

fn catalog_stage_sets() -> BTreeMap<String, BTreeSet<String>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/catalog.toml");
    let doc: toml::Value = toml::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for tool in doc["tool"].as_array().unwrap() {
        let name = tool["name"].as_str().unwrap();
        for st in tool["stages"].as_array().unwrap() {
            out.entry(st.as_str().unwrap().to_string()).or_default().insert(name.to_string());
        }
    }
    out
}

fn masking() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let registry = Registry::with_catalog().unwrap();
    let p = prepared(BINARY, out);
    let catalog = catalog_stage_sets();
    let cfg = SearchConfig::default();
    let s = settings(out, Algorithm::Hierarchical, PolicyChoice::Scripted { epsilon: NOISE }, cfg.clone());
    let mut requests = 0;
    for seed in 0..3 {
        let policy = Recording { inner: scripted_policy(&p, Algorithm::Hierarchical, seed, NOISE), seen: Mutex::new(vec![]) };
        let problem = problem_for(&p, &registry, &s, seed);
        let rep = run_search(&problem, &policy, Algorithm::Hierarchical, &cfg).map_err(|e| e.to_string())?;
        for e in &rep.expansions {
            let stage = e.stage.ok_or("expansion without a stage")?;
            let exposed: BTreeSet<String> = e.exposed.iter().cloned().collect();
            ensure(Some(&exposed) == catalog.get(stage.key()), || format!("seed {seed}: expansion at {stage} exposed {exposed:?}"))?;
        }
        for (stage, names) in policy.seen.into_inner().unwrap() {
            let stage = stage.ok_or("proposal request without a stage")?;
            ensure(Some(&names) == catalog.get(stage.key()), || format!("seed {seed}: schemas sent at {stage} differ"))?;
            requests += 1;
        }
    }
    let mut rates = Vec::new();
    for masked in [true, false] {
        let cfg = SearchConfig { masking: masked, ..SearchConfig::default() };
        let mut s = settings(out, Algorithm::Hierarchical, PolicyChoice::Scripted { epsilon: NOISE }, cfg);
        s.trials = PAIRED_SEEDS as usize;
        let report = run_trials(&p, &registry, &s).map_err(|e| e.to_string())?;
        rates.push(report.results.iter().filter(|r| r.solved).count() as f64 / report.trials as f64);
    }
    ensure(rates[1] <= rates[0], || format!("unmasked solved rate {} > masked {}", rates[1], rates[0]))?;
    Ok(format!("{requests} proposal requests carried exactly their stage's tools; solved rate masked {} vs unmasked {}", rates[0], rates[1]))
}

// 9 -------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Debug)]
enum Ty {
    Num,
    Bool,
    Str,
}

fn gen_expr(rng: &mut ChaCha8Rng, ty: Ty, depth: usize) -> Expr {
    let leaf = depth == 0 || rng.random_bool(0.25);
    match ty {
        Ty::Num if leaf => {
            if rng.random_bool(0.5) {
                Expr::col(["x", "y", "z"][rng.random_range(0..3)])
            } else {
                Expr::Num(rng.random_range(0..40) as f64 / 4.0)
            }
        }
        Ty::Num => match rng.random_range(0..5) {
            0 => Expr::Neg(Box::new(gen_expr(rng, Ty::Num, depth - 1))),
            i => Expr::binary(
                [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][i - 1],
                gen_expr(rng, Ty::Num, depth - 1),
                gen_expr(rng, Ty::Num, depth - 1),
            ),
        },
        Ty::Str if leaf || rng.random_bool(0.7) => {
            if rng.random_bool(0.5) {
                Expr::col("s")
            } else {
                Expr::Str(["a", "b", "it's", "c\\d"][rng.random_range(0..4)].to_string())
            }
        }
        Ty::Str => Expr::col("s"),
        Ty::Bool if leaf => match rng.random_range(0..3) {
            0 => Expr::col("flag"),
            1 => Expr::col("Transported"),
            _ => Expr::Bool(rng.random_bool(0.5)),
        },
        Ty::Bool => {
            let cmp = [BinOp::Gt, BinOp::Ge, BinOp::Lt, BinOp::Le, BinOp::Eq, BinOp::Ne];
            match rng.random_range(0..7) {
                0 => Expr::Not(Box::new(gen_expr(rng, Ty::Bool, depth - 1))),
                1 | 2 => {
                    let t = [Ty::Num, Ty::Num, Ty::Str, Ty::Bool][rng.random_range(0..4)];
                    Expr::binary(cmp[rng.random_range(0..6)], gen_expr(rng, t, depth - 1), gen_expr(rng, t, depth - 1))
                }
                3 | 4 => Expr::binary(
                    if rng.random_bool(0.5) { BinOp::And } else { BinOp::Or },
                    gen_expr(rng, Ty::Bool, depth - 1),
                    gen_expr(rng, Ty::Bool, depth - 1),
                ),
                j => {
                    let t = [Ty::Num, Ty::Str, Ty::Bool][rng.random_range(0..3)];
                    let inner = Box::new(gen_expr(rng, t, depth - 1));
                    if j == 5 {
                        Expr::NotNa(inner)
                    } else {
                        Expr::IsNa(inner)
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Cell {
    Num(Option<f64>),
    Bool(Option<bool>),
    Str(Option<String>),
}

/// Row-at-a-time reference semantics.
fn interp(e: &Expr, row: &HashMap<&str, Cell>) -> Cell {
    match e {
        Expr::Column(c) => row[c.as_str()].clone(),
        Expr::Num(v) => Cell::Num(Some(*v)),
        Expr::Str(s) => Cell::Str(Some(s.clone())),
        Expr::Bool(b) => Cell::Bool(Some(*b)),
        Expr::Neg(x) => match interp(x, row) {
            Cell::Num(v) => Cell::Num(v.map(|v| -v)),
            _ => unreachable!(),
        },
        Expr::Not(x) => match interp(x, row) {
            Cell::Bool(v) => Cell::Bool(Some(!v.unwrap_or(false))),
            _ => unreachable!(),
        },
        Expr::NotNa(x) | Expr::IsNa(x) => {
            let missing = match interp(x, row) {
                Cell::Num(v) => v.is_none(),
                Cell::Bool(v) => v.is_none(),
                Cell::Str(v) => v.is_none(),
            };
            Cell::Bool(Some(missing == matches!(e, Expr::IsNa(_))))
        }
        Expr::Binary { op, lhs, rhs } => {
            let (l, r) = (interp(lhs, row), interp(rhs, row));
            use std::cmp::Ordering::*;
            let ord = match (&l, &r) {
                (Cell::Num(Some(a)), Cell::Num(Some(b))) => a.partial_cmp(b),
                (Cell::Str(Some(a)), Cell::Str(Some(b))) => Some(a.cmp(b)),
                (Cell::Bool(Some(a)), Cell::Bool(Some(b))) => Some(a.cmp(b)),
                _ => None,
            };
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                    let (Cell::Num(a), Cell::Num(b)) = (l, r) else { unreachable!() };
                    let v = match (a, b) {
                        (Some(a), Some(b)) => match op {
                            BinOp::Add => Some(a + b),
                            BinOp::Sub => Some(a - b),
                            BinOp::Mul => Some(a * b),
                            _ if b == 0.0 => None,
                            _ => Some(a / b),
                        },
                        _ => None,
                    };
                    Cell::Num(v.filter(|v| v.is_finite()))
                }
                BinOp::And | BinOp::Or => {
                    let (Cell::Bool(a), Cell::Bool(b)) = (l, r) else { unreachable!() };
                    let (a, b) = (a.unwrap_or(false), b.unwrap_or(false));
                    Cell::Bool(Some(if *op == BinOp::And { a && b } else { a || b }))
                }
                cmp => Cell::Bool(Some(match ord {
                    None => false,
                    Some(o) => match cmp {
                        BinOp::Gt => o == Greater,
                        BinOp::Ge => o != Less,
                        BinOp::Lt => o == Less,
                        BinOp::Le => o != Greater,
                        BinOp::Eq => o == Equal,
                        _ => o != Equal,
                    },
                })),
            }
        }
    }
}

fn expr_frame(rng: &mut ChaCha8Rng, rows: usize) -> Table {
    let num = |rng: &mut ChaCha8Rng| {
        ColumnData::Float((0..rows).map(|_| rng.random_bool(0.85).then(|| rng.random_range(-4..5) as f64 / 2.0)).collect())
    };
    let boolean = |rng: &mut ChaCha8Rng| ColumnData::Bool((0..rows).map(|_| rng.random_bool(0.85).then(|| rng.random_bool(0.5))).collect());
    let (x, y, z) = (num(rng), num(rng), num(rng));
    let (flag, transported) = (boolean(rng), boolean(rng));
    let s = ColumnData::Text(
        (0..rows).map(|_| rng.random_bool(0.85).then(|| ["a", "b", "it's", "zz"][rng.random_range(0..4)].to_string())).collect(),
    );
    Table::new(vec![
        Column::new("x", x),
        Column::new("y", y),
        Column::new("z", z),
        Column::new("flag", flag),
        Column::new("Transported", transported),
        Column::new("s", s),
    ])
    .unwrap()
}

fn row_cells(t: &Table, i: usize) -> HashMap<&str, Cell> {
    t.columns()
        .iter()
        .map(|c| {
            let cell = match &c.data {
                ColumnData::Float(v) => Cell::Num(v[i]),
                ColumnData::Bool(v) => Cell::Bool(v[i]),
                ColumnData::Text(v) => Cell::Str(v[i].clone()),
                _ => unreachable!(),
            };
            (c.name.as_str(), cell)
        })
        .collect()
}

fn series_cell(s: &Series, i: usize) -> Cell {
    match s {
        Series::Num(v) => Cell::Num(v[i]),
        Series::Bool(v) => Cell::Bool(v[i]),
        Series::Str(v) => Cell::Str(v[i].clone()),
    }
}

fn expression_parser() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let frame = expr_frame(&mut rng, 40);
    for i in 0..500 {
        let ty = [Ty::Bool, Ty::Num][i % 2];
        let depth = rng.random_range(1..=5);
        let ast = gen_expr(&mut rng, ty, depth);
        let src = ast.to_string();
        let parsed = expr::parse(&src).map_err(|e| format!("`{src}`: {e}"))?;
        ensure(parsed == ast, || format!("`{src}` parsed to a different tree"))?;
        let got = expr::eval(&parsed, &frame).map_err(|e| format!("`{src}`: {e}"))?;
        for r in 0..frame.n_rows() {
            let want = interp(&ast, &row_cells(&frame, r));
            ensure(series_cell(&got, r) == want, || format!("`{src}` row {r}: {:?} vs {want:?}", series_cell(&got, r)))?;
        }
    }
    let fixture = expr::parse("col1 > 0 and col2 < 100").map_err(|e| e.to_string())?;
    ensure(
        fixture
            == Expr::binary(
                BinOp::And,
                Expr::binary(BinOp::Gt, Expr::col("col1"), Expr::Num(0.0)),
                Expr::binary(BinOp::Lt, Expr::col("col2"), Expr::Num(100.0)),
            ),
        || format!("fixture 1 parsed as {fixture:?}"),
    )?;
    let fixture = expr::parse("Transported.notna()").map_err(|e| e.to_string())?;
    ensure(fixture == Expr::NotNa(Box::new(Expr::col("Transported"))), || format!("fixture 2 parsed as {fixture:?}"))?;
    Ok("500 generated expressions agree with the row interpreter; both fixtures parse".into())
}

// 10 ------------------------------------------------------------------------

fn wire_and_log() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let run = llm_scenario(dir.path());
    let golden = read_golden_requests();
    ensure(run.replies == read_golden_replies(), || "canned replies differ from the golden file".into())?;
    ensure(run.requests == golden, || {
        let i = run.requests.iter().zip(&golden).position(|(a, b)| a != b).unwrap_or(run.requests.len().min(golden.len()));
        format!("request {i} differs from golden ({} sent, {} golden)", run.requests.len(), golden.len())
    })?;
    let warnings = validate_log(&run.log).map_err(|e| e.to_string())?;
    ensure(warnings.is_empty(), || format!("log warnings: {warnings:?}"))?;
    let expected: u64 = run
        .replies
        .iter()
        .map(|r| serde_json::from_str::<serde_json::Value>(r).unwrap()["usage"]["total_tokens"].as_u64().unwrap())
        .sum();
    let summary = run.log["steps"].as_array().unwrap().iter().find(|s| s["step_type"] == "execution_summary").cloned();
    let logged = summary.as_ref().and_then(|s| s["total_tokens"].as_u64());
    ensure(logged == Some(expected) && run.result.total_tokens == expected, || {
        format!("total_tokens logged {logged:?}, trial {}, expected {expected}", run.result.total_tokens)
    })?;
    ensure(run.result.valid, || format!("llm trial invalid: {:?}", run.result.problem))?;
    Ok(format!("{} requests byte-identical, log valid, total_tokens {expected}", golden.len()))
}

// ---------------------------------------------------------------------------

fn main() {
    type Criterion = (&'static str, fn() -> Check, Duration);
    let criteria: [Criterion; 10] = [
        ("consistency formula", consistency_formula, Duration::from_secs(1)),
        ("mcts bookkeeping oracle", mcts_bookkeeping, Duration::from_secs(10)),
        ("uct spot value", uct_spot_value, Duration::from_secs(1)),
        ("scratchpad laws", scratchpad_laws, Duration::from_secs(5)),
        ("toolkit round trips", toolkit_round_trips, Duration::from_secs(10)),
        ("golden end to end", golden_end_to_end, Duration::from_secs(30)),
        ("shaping helps", shaping_helps, Duration::from_secs(300)),
        ("masking", masking, Duration::from_secs(300)),
        ("expression parser", expression_parser, Duration::from_secs(10)),
        ("wire and log contracts", wire_and_log, Duration::from_secs(10)),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|p| !name.contains(p)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if took <= *budget {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {took:.1?}, budget {budget:?}"))
            }
        });
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} [{took:.2?}]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} [{took:.2?}]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
