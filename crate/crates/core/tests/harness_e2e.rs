use toolplan_core::competition::Competition;
use toolplan_core::harness::{prepare, run_trials, PolicyChoice, TrialSettings};
use toolplan_core::search::{Algorithm, SearchConfig};
use toolplan_core::trajlog::ClockKind;
use toolplan_core::Registry;

fn settings(out: &std::path::Path, algorithm: Algorithm, trials: usize) -> TrialSettings {
    TrialSettings {
        algorithm,
        policy: PolicyChoice::Scripted { epsilon: 0.0 },
        search: SearchConfig::default(),
        trials,
        base_seed: 0,
        out_dir: out.to_path_buf(),
        data_dir: out.join("kaggle"),
        clock: ClockKind::Logical,
    }
}

#[test]
fn golden_react_solves_every_synthetic_competition() {
    let dir = tempfile::tempdir().unwrap();
    let registry = Registry::with_catalog().unwrap();
    for name in ["synthetic_spaceship", "synthetic_housing", "synthetic_terrain"] {
        let s = settings(dir.path(), Algorithm::React, 2);
        let prepared = prepare(Competition::find(name, None).unwrap(), dir.path(), &s.data_dir).unwrap();
        let report = run_trials(&prepared, &registry, &s).unwrap();
        for r in &report.results {
            assert!(r.valid, "{name}: {:?}", r);
            println!("{name} seed {} score {:?} pct {}", r.seed, r.score, r.percentile);
        }
        assert_eq!(report.consistency, 1.0);
    }
}

#[test]
fn stub_competition_without_data_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let err = prepare(Competition::find("spaceship_titanic", None).unwrap(), dir.path(), dir.path()).unwrap_err();
    assert!(err.to_string().contains("not found"), "{err}");
}
