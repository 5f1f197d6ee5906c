use std::path::Path;
use std::process::{Command, Output};

fn toolplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toolplan")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn tools_lists_the_catalog() {
    let o = toolplan(&["tools"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 62);
    let o = toolplan(&["tools", "--stage", "modeling"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().skip(1).all(|l| l.contains("modeling")));
}

#[test]
fn unknown_stage_is_a_usage_error() {
    let o = toolplan(&["tools", "--stage", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown stage"));
}

#[test]
fn run_argument_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["run", "-c", "nope", "--out", out],
        vec!["run", "-c", "synthetic_housing", "-a", "react", "--no-masking", "--out", out],
        vec!["run", "-c", "synthetic_housing", "-a", "bfs", "--out", out],
        vec!["run", "-c", "synthetic_housing", "--epsilon", "2", "--out", out],
        vec!["run", "-c", "bank_churn", "--out", out, "--data-dir", out],
    ] {
        let o = toolplan(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn run_then_replay_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = toolplan(&["run", "-c", "synthetic_housing", "-a", "mcts-shaped", "--trials", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("2/2"));
    for seed in 0..2 {
        assert!(out.join(format!("submissions/synthetic_housing/mcts-shaped/trial_{seed}.csv")).exists());
    }
    let log = out.join("logs/synthetic_housing/mcts-shaped/trial_0.json");
    let o = toolplan(&["replay", log.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("synthetic_housing / mcts-shaped / seed 0"));
    let report = out.join("reports/synthetic_housing_mcts-shaped.json");
    let o = toolplan(&["report", report.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("synthetic_housing"));
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn replay_rejects_malformed_logs_and_warns_on_unknown_steps() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"steps\": [{\"step_number\": 1}]}");
    assert_eq!(toolplan(&["replay", &bad]).status.code(), Some(3));
    let junk = write(dir.path(), "junk.json", "not json");
    assert_eq!(toolplan(&["replay", &junk]).status.code(), Some(3));
    let odd = write(
        dir.path(),
        "odd.json",
        r#"{"steps": [{"step_number": 1, "timestamp": "2025-01-01T00:00:00.000000", "step_type": "teleport", "action": "x"}]}"#,
    );
    let o = toolplan(&["replay", &odd]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("unknown step_type 'teleport'"));
}

#[test]
fn report_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "r.json", "{\"rows\": 3}");
    assert_eq!(toolplan(&["report", &bad]).status.code(), Some(3));
}
