mod common;

use std::fs;

use common::{csv_rows, small_config};
use uwa_chest::bench::{run_benchmark, run_estimate, ExperimentConfig, ARTIFACT_FILES};
use uwa_chest::SolverKind;

#[test]
fn one_record_per_trial_condition_and_solver() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.n_trials = 5;
    cfg.solvers = vec![SolverKind::Admm];
    let (out, summary) = run_benchmark(&cfg).unwrap();
    assert_eq!(out.records.len(), 10);
    assert_eq!(csv_rows(&dir.path().join("trials.csv")).len(), 10);
    assert_eq!(summary.len(), 2);
    for name in ARTIFACT_FILES {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn repeated_runs_write_identical_csvs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_benchmark(&small_config(a.path())).unwrap();
    run_benchmark(&small_config(b.path())).unwrap();
    for name in ARTIFACT_FILES.iter().filter(|n| n.ends_with(".csv")) {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn different_seeds_give_different_trials() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_benchmark(&small_config(a.path())).unwrap();
    let mut other = small_config(b.path());
    other.seed += 1;
    run_benchmark(&other).unwrap();
    assert_ne!(
        fs::read(a.path().join("trials.csv")).unwrap(),
        fs::read(b.path().join("trials.csv")).unwrap()
    );
}

#[test]
fn non_convergence_is_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.admm.max_iter = 1;
    cfg.solvers = vec![SolverKind::Admm];
    let (out, summary) = run_benchmark(&cfg).unwrap();
    assert!(out.records.iter().all(|r| !r.converged && r.iterations == 1));
    assert!(summary.iter().all(|s| s.converged_fraction == 0.0));
    assert!(out.records.iter().all(|r| r.nmsd_db.is_finite()));
}

#[test]
fn unwritable_output_dir_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = small_config(&blocker.join("out"));
    assert!(run_benchmark(&cfg).is_err());
}

#[test]
fn summary_json_fields() {
    let dir = tempfile::tempdir().unwrap();
    run_benchmark(&small_config(dir.path())).unwrap();
    let text = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let rows: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(rows.len(), 6);
    for r in rows {
        for key in ["mean_nmsd_db", "mean_iterations", "mean_runtime_s"] {
            assert!(r[key].is_number(), "{key} missing");
        }
    }
}

#[test]
fn traces_match_iteration_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = run_benchmark(&small_config(dir.path())).unwrap();
    for rec in &out.records {
        let n = out
            .nmsd_traces
            .iter()
            .filter(|t| t.trial == rec.trial && t.noise_condition == rec.noise_condition && t.solver == rec.solver_name)
            .count();
        assert_eq!(n, rec.iterations);
    }
    let admm_iters: usize = out.records.iter().filter(|r| r.solver_name == "admm").map(|r| r.iterations).sum();
    assert_eq!(out.residual_traces.len(), admm_iters);
    // one snapshot trial x 2 conditions x 3 solvers x 80 taps
    assert_eq!(out.cir_rows.len(), 2 * 3 * 80);
}

#[test]
fn estimate_matches_benchmark_trial_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (out, _) = run_benchmark(&cfg).unwrap();
    let est = run_estimate(&cfg, SolverKind::Admm, Some("inr50")).unwrap();
    let rec = out
        .records
        .iter()
        .find(|r| r.trial == 0 && r.noise_condition == "inr50" && r.solver_name == "admm")
        .unwrap();
    assert_eq!(est.nmsd_db, rec.nmsd_db);
    assert!(run_estimate(&cfg, SolverKind::Admm, Some("missing")).is_err());
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let path = dir.path().join("cfg.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(ExperimentConfig::load(&path).unwrap(), cfg);
}
