use spde_homog::experiments::{
    emit_report, run_cell, run_noise_check, run_semigroup_study, run_simulate, run_thm1_convergence,
    run_variance_study, ExperimentConfig, ExperimentReport, Table, VarianceTarget,
};
use spde_homog::Error;

const DEMO: &str = include_str!("../../../configs/demo_simulate.json");
const GOLDEN: &str = include_str!("golden/demo_simulate_report.json");

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(text).unwrap()
}

#[test]
fn demo_report_matches_golden_file() {
    let report = run_simulate(&config(DEMO)).unwrap();
    assert_eq!(report.to_json().unwrap(), GOLDEN);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = config(DEMO);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let written: Vec<_> = dirs.iter().map(|d| emit_report(&run_simulate(&cfg).unwrap(), d.path()).unwrap()).collect();
    assert_eq!(written[0].len(), written[1].len());
    for (a, b) in written[0].iter().zip(&written[1]) {
        assert_eq!(a.file_name(), b.file_name());
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
    let again = emit_report(&run_simulate(&cfg).unwrap(), dirs[0].path()).unwrap();
    for (a, b) in again.iter().zip(&written[1]) {
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}

#[test]
fn seed_changes_paths_but_not_hash_scheme() {
    let mut cfg = config(DEMO);
    let a = run_simulate(&cfg).unwrap();
    cfg.study.seed += 1;
    let b = run_simulate(&cfg).unwrap();
    assert_ne!(a.config_hash, b.config_hash);
    assert_ne!(a.table("trajectory_path0"), b.table("trajectory_path0"));
    assert_eq!(a.config_hash.len(), 64);
}

#[test]
fn written_report_round_trips() {
    let report = run_cell(&config(include_str!("../../../configs/cell_cosine.json"))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    let back = ExperimentReport::from_json(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(back, report);
    let csv = std::fs::read_to_string(dir.path().join("rho.csv")).unwrap();
    assert!(csv.starts_with("k,re,im\n") && !csv.contains('\r'));
}

#[test]
fn empty_report_writes_header_only_csv() {
    let mut report = ExperimentReport::new("empty", "0".repeat(64), 0);
    report.tables.push(Table::new("errors", &["eps", "error", "se"]));
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("errors.csv")).unwrap(), "eps,error,se\n");
}

#[test]
fn config_validation() {
    let bad_order = DEMO.replace("\"epsilons\": [0.25]", "\"epsilons\": [0.125, 0.25]");
    assert!(matches!(ExperimentConfig::from_json(&bad_order), Err(Error::Config(_))));
    let bad_eps = DEMO.replace("\"epsilons\": [0.25]", "\"epsilons\": [0.3]");
    assert!(matches!(ExperimentConfig::from_json(&bad_eps), Err(Error::InvalidEpsilon(_))));
    let one_path = DEMO.replace("\"paths\": 4", "\"paths\": 1");
    assert!(matches!(ExperimentConfig::from_json(&one_path), Err(Error::Config(_))));
    let typo = DEMO.replace("\"paths\"", "\"pahts\"");
    assert!(ExperimentConfig::from_json(&typo).is_err());
}

const HEAT: &str = r#"{ "builtin": "heat", "sigma_value": 1.4142135623730951, "cell_modes": 16 }"#;

fn trivial(noise: &str, solver: &str, study: &str) -> ExperimentConfig {
    config(&format!(r#"{{ "coefficients": {HEAT}, "noise": {noise}, "solver": {solver}, "study": {study} }}"#))
}

#[test]
fn trivial_cell_convergence_is_at_scheme_floor() {
    let cfg = trivial(
        r#"{ "family": "power-decay", "alpha": 0.75, "profile": [[0, 1.0, 0.0]], "k_max_per_cell": 4 }"#,
        r#"{ "modes_per_class": 16, "t_final": 0.5 }"#,
        r#"{ "epsilons": [0.25, 0.125, 0.0625], "s": 1.0, "paths": 8, "batches": 4 }"#,
    );
    let report = run_thm1_convergence(&cfg).unwrap();
    let err = report.table("errors").unwrap().column("error").unwrap();
    assert!(err.iter().all(|&e| e < 1e-6), "{err:?}");
}

#[test]
fn zero_noise_skips_the_fit() {
    let cfg = config(
        r#"{
        "coefficients": { "builtin": "cosine-potential" },
        "noise": { "family": "power-decay", "alpha": 0.75, "profile": [[0, 0.0, 0.0]], "k_max_per_cell": 4 },
        "solver": { "modes_per_class": 16, "t_final": 0.05 },
        "study": { "epsilons": [0.25, 0.125, 0.0625], "paths": 2, "batches": 1 }
    }"#,
    );
    let report = run_thm1_convergence(&cfg).unwrap();
    assert!(report.table("errors").unwrap().column("error").unwrap().iter().all(|&e| e == 0.0));
    assert!(report.fit.is_none());
    assert!(report.notes.iter().any(|n| n.contains("fit skipped")));
}

#[test]
fn convergence_needs_three_epsilons() {
    let cfg = config(
        r#"{
        "coefficients": { "builtin": "cosine-potential" },
        "noise": { "family": "power-decay", "alpha": 0.75, "profile": [[0, 1.0, 0.0]], "k_max_per_cell": 4 },
        "solver": { "modes_per_class": 16, "t_final": 0.05 },
        "study": { "epsilons": [0.25, 0.125], "paths": 2, "batches": 1 }
    }"#,
    );
    assert!(matches!(run_thm1_convergence(&cfg), Err(Error::FitFailed(_))));
}

#[test]
fn trivial_cell_variance_gap_vanishes() {
    let cfg = trivial(
        r#"{ "family": "constant-white", "k_max": 16 }"#,
        r#"{ "scheme": "block-exponential", "modes_per_class": 16, "t_final": 2.0 }"#,
        r#"{ "epsilons": [0.25, 0.125, 0.0625], "watch": [1] }"#,
    );
    let report = run_variance_study(&cfg, VarianceTarget::Thm3).unwrap();
    let gaps = report.table("variance").unwrap().column("relative_gap").unwrap();
    assert!(gaps.iter().all(|g| g.abs() < 1e-10), "{gaps:?}");
}

#[test]
fn weak_study_rejects_uncentred_noise() {
    let cfg = config(
        r#"{
        "coefficients": { "builtin": "cosine-potential" },
        "noise": { "family": "power-decay", "alpha": 0.5, "profile": [[0, 1.0, 0.0]], "k_max": 16 },
        "solver": { "modes_per_class": 16, "t_final": 0.1 },
        "study": { "epsilons": [0.25, 0.125, 0.0625] }
    }"#,
    );
    assert!(matches!(run_variance_study(&cfg, VarianceTarget::Thm2), Err(Error::AssumptionViolated(_))));
}

#[test]
fn trivial_cell_remainder_vanishes() {
    let cfg = trivial(
        r#"{ "family": "constant-white", "k_max": 16 }"#,
        r#"{ "modes_per_class": 16, "t_final": 1.0 }"#,
        r#"{ "epsilons": [0.125, 0.0625, 0.03125], "watch": [1] }"#,
    );
    let report = run_semigroup_study(&cfg).unwrap();
    let sup = report.table("remainder").unwrap().column("sup_remainder").unwrap();
    assert!(sup.iter().all(|&x| x < 1e-12), "{sup:?}");
    assert!(report.passed());
}

#[test]
fn noise_check_reports_validators() {
    let report = run_noise_check(&config(include_str!("../../../configs/lambda_tail_convergent.json"))).unwrap();
    assert_eq!(report.summary["assumption4.passed"], 1.0);
    assert!(report.passed());
    assert_eq!(report.table("lambda").unwrap().rows.len(), 4);
}
