mod common;

use common::*;
use toolplan_core::trajlog::validate_log;

#[test]
fn llm_requests_match_golden() {
    let dir = tempfile::tempdir().unwrap();
    let run = llm_scenario(dir.path());
    if std::env::var("UPDATE_GOLDEN").is_ok() {
        write_golden(&run);
    }
    assert!(run.result.valid, "{:?}", run.result);
    assert_eq!(run.replies, read_golden_replies());
    let golden = read_golden_requests();
    assert_eq!(run.requests.len(), golden.len());
    for (i, (got, want)) in run.requests.iter().zip(&golden).enumerate() {
        assert_eq!(got, want, "request {i} differs");
    }
    validate_log(&run.log).unwrap();
}

#[test]
fn requests_do_not_depend_on_the_run_directory() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(llm_scenario(a.path()).requests, llm_scenario(b.path()).requests);
}
