use std::fs;
use std::path::Path;
use std::process::Command;

use natmaplab::checks::{check_specs, Relation, Slack};
use natmaplab::report::{build_report, report, COLUMNS, REPORT_FILE};
use natmaplab::run::{run_config, RESULT_FILE, TIMING_FILE};
use natmaplab::{CliError, Experiment, ExperimentConfig, ExperimentResult, Row};
use proptest::prelude::*;

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

/// A fast config writing into `dir`.
fn fast(experiment: &str, n: usize, dir: &Path) -> ExperimentConfig {
    config(&format!(
        r#"{{"experiment": "{experiment}", "n": {n}, "output_dir": {:?}}}"#,
        dir.to_str().unwrap()
    ))
}

fn invalid(json: &str) -> String {
    match ExperimentConfig::from_json(json).and_then(|c| c.resolve()) {
        Err(CliError::ConfigInvalid(msg)) => msg,
        other => panic!("expected ConfigInvalid, got {other:?}"),
    }
}

#[test]
fn unknown_fields_are_rejected() {
    invalid(r#"{"experiment": "entropy", "colour": 3}"#);
    invalid(r#"{"experiment": "entropy", "backend": {"kind": "grid", "bumpy": 1}}"#);
    invalid(r#"{"experiment": "entropy", "grid": {"scheme": "product_gauss", "resolution": 8, "x": 0}}"#);
}

#[test]
fn bad_values_are_rejected() {
    assert!(invalid(r#"{"experiment": "no_such"}"#).contains("unknown experiment"));
    assert!(invalid(r#"{"experiment": "entropy", "tolerances": {"comass.max": 0.1}}"#).contains("unknown check"));
    invalid(r#"{"experiment": "entropy", "tolerances": {"entropy": -1.0}}"#);
    invalid(r#"{"experiment": "entropy", "n": 5}"#);
    invalid(r#"{"experiment": "entropy", "n": 3, "backend": {"kind": "grid"}}"#);
    invalid(r#"{"experiment": "natural_map_suite", "n": 3, "c_schedule": [2.0]}"#);
    invalid(r#"{"experiment": "natural_map_suite", "c_schedule": []}"#);
    invalid(r#"{"experiment": "derivative_bound", "mc_count": 1}"#);
    invalid(r#"{"experiment": "entropy", "samples": 0}"#);
    invalid(r#"{"experiment": "comass", "grid": {"scheme": "nope", "resolution": 8}}"#);
    invalid(r#"{"experiment": "entropy", "n": 2, "backend": {"kind": "grid", "bump": {"center": [0, 0, 0], "radius": 1, "amplitude": 0.5}}}"#);
}

#[test]
fn defaults_are_resolved() {
    let r = config(r#"{"experiment": "natural_map_suite"}"#).resolve().unwrap();
    assert_eq!(r.n, 3);
    assert_eq!(r.c_schedule, vec![3.0, 2.5, 2.25]);
    assert_eq!(r.mc_count, 200_000);
    assert_eq!(r.tolerance("jacobian_fc"), 5e-2);
    let r = config(r#"{"experiment": "entropy", "tolerances": {"entropy": 0.5}}"#).resolve().unwrap();
    assert_eq!(r.mc_count, 0);
    assert_eq!(r.tolerance("entropy"), 0.5);
    assert_eq!(r.tolerances.len(), check_specs(Experiment::Entropy).len());
    let r = config(r#"{"experiment": "entropy", "n": 2, "backend": {"kind": "grid"}}"#).resolve().unwrap();
    let json = serde_json::to_string(&r.backend).unwrap();
    assert!(json.contains("\"spacing\":0.01") && json.contains("\"mesh_radius\":2.0"), "{json}");
}

#[test]
fn every_experiment_has_anchored_checks() {
    assert_eq!(Experiment::ALL.len(), 13);
    for e in Experiment::ALL {
        assert_eq!(Experiment::parse(e.name()), Some(e));
        let specs = check_specs(e);
        assert!(!specs.is_empty());
        for s in specs {
            assert!(!s.anchor.is_empty() && s.tolerance >= 0.0, "{}", s.id);
        }
    }
}

#[test]
fn run_writes_result_csv_and_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("cusp");
    let out = run_config(&fast("cusp_suite", 3, &dir)).unwrap();
    assert_eq!(out.exit_code(), 0);
    let text = fs::read_to_string(dir.join(RESULT_FILE)).unwrap();
    let parsed: ExperimentResult = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed, out.result);
    assert_eq!(parsed.schema, 1);
    assert_eq!(parsed.config.n, 3);
    assert!(!text.contains("wall_time"));
    assert!(dir.join("cusp.slice_volume.csv").exists());
    assert!(dir.join("cusp.downstairs.csv").exists());
    let timing: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join(TIMING_FILE)).unwrap()).unwrap();
    assert!(timing["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(!dir.join(".lock").exists());
    for row in &parsed.rows {
        assert_eq!(row.pass, row.evaluate(), "{}", row.name);
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_config(&fast("cone_decay", 3, &a)).unwrap();
    run_config(&fast("cone_decay", 3, &b)).unwrap();
    assert_eq!(fs::read(a.join(RESULT_FILE)).unwrap(), fs::read(b.join(RESULT_FILE)).unwrap());
    assert_eq!(fs::read(a.join("cone.decay.csv")).unwrap(), fs::read(b.join("cone.decay.csv")).unwrap());
}

#[test]
fn failing_check_gives_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(&format!(
        r#"{{"experiment": "entropy", "n": 3, "tolerances": {{"entropy": 0.0}}, "output_dir": {:?}}}"#,
        tmp.path().to_str().unwrap()
    ));
    let out = run_config(&cfg).unwrap();
    assert_eq!(out.exit_code(), 2);
    assert!(!out.result.row("entropy").unwrap().pass);
    assert!(out.result.row("entropy.volumes").unwrap().pass);
}

#[test]
fn module_errors_become_failed_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(&format!(
        r#"{{"experiment": "entropy", "n": 2,
            "backend": {{"kind": "grid", "bump": {{"center": [1.5, 0.0], "radius": 1.0, "amplitude": 0.5}}}},
            "output_dir": {:?}}}"#,
        tmp.path().to_str().unwrap()
    ));
    let out = run_config(&cfg).unwrap();
    assert_eq!(out.exit_code(), 2);
    let row = out.result.row("entropy").unwrap();
    assert!(!row.pass && row.measured.is_none() && row.error.is_some());
    // not measured on the grid backend
    assert!(out.result.row("entropy.volumes").is_none());
}

#[test]
fn locked_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join(".lock"), "").unwrap();
    match run_config(&fast("entropy", 2, tmp.path())) {
        Err(CliError::Locked(_)) => {}
        other => panic!("{other:?}"),
    }
    assert!(!tmp.path().join(RESULT_FILE).exists());
}

#[test]
fn report_groups_by_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    run_config(&fast("entropy", 3, &tmp.path().join("e3"))).unwrap();
    run_config(&fast("cusp_suite", 2, &tmp.path().join("c2"))).unwrap();
    run_config(&fast("entropy", 2, &tmp.path().join("nested/e2"))).unwrap();
    let rep = report(tmp.path()).unwrap();
    let ns: Vec<usize> = rep.rows.iter().map(|r| r.n).collect();
    assert!(ns.windows(2).all(|w| w[0] <= w[1]), "{ns:?}");
    assert_eq!(rep.rows.first().unwrap().n, 2);
    assert_eq!(rep.rows.last().unwrap().n, 3);
    assert_eq!(rep.rows.len(), 2 + 5 + 2);
    let csv = fs::read_to_string(tmp.path().join(REPORT_FILE)).unwrap();
    assert_eq!(csv.lines().next().unwrap(), COLUMNS.join(","));
    assert_eq!(csv.lines().count(), 1 + rep.rows.len());
    let table = rep.to_table();
    assert!(table.find("n = 2").unwrap() < table.find("n = 3").unwrap());
}

#[test]
fn report_of_repeated_runs_matches() {
    let tmp = tempfile::tempdir().unwrap();
    run_config(&fast("barycenter_suite", 2, &tmp.path().join("a"))).unwrap();
    run_config(&fast("barycenter_suite", 2, &tmp.path().join("b"))).unwrap();
    let rep = build_report(tmp.path()).unwrap();
    let (a, b) = rep.rows.split_at(rep.rows.len() / 2);
    for (x, y) in a.iter().zip(b) {
        assert_eq!((x.measured, &x.check, &x.config_hash), (y.measured, &y.check, &y.config_hash));
        assert_ne!(x.run, y.run);
    }
}

#[test]
fn report_without_results_fails() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(matches!(build_report(tmp.path()), Err(CliError::NoResults(_))));
    assert!(matches!(build_report(&tmp.path().join("missing")), Err(CliError::NoResults(_))));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_natmaplab");
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"experiment": "entropy", "oops": 1}"#).unwrap();
    let status = Command::new(bin).args(["run", bad.to_str().unwrap()]).output().unwrap().status;
    assert_eq!(status.code(), Some(3));

    let good = tmp.path().join("good.json");
    let out_dir = tmp.path().join("out");
    fs::write(&good, format!(r#"{{"experiment": "entropy", "n": 2, "output_dir": {:?}}}"#, out_dir.to_str().unwrap())).unwrap();
    let status = Command::new(bin).args(["run", good.to_str().unwrap()]).output().unwrap().status;
    assert_eq!(status.code(), Some(0));

    let fail = tmp.path().join("fail.json");
    fs::write(&fail, format!(r#"{{"experiment": "entropy", "n": 2, "tolerances": {{"entropy": 0}}, "output_dir": {:?}}}"#, tmp.path().join("f").to_str().unwrap())).unwrap();
    let status = Command::new(bin).args(["run", fail.to_str().unwrap()]).output().unwrap().status;
    assert_eq!(status.code(), Some(2));

    let out = Command::new(bin).args(["report", out_dir.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("entropy"));
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let status = Command::new(bin).args(["report", empty.to_str().unwrap()]).output().unwrap().status;
    assert_eq!(status.code(), Some(1));

    let out = Command::new(bin).arg("list-experiments").output().unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 13);
}

fn row(measured: f64, bound: f64, relation: Relation, slack: Slack, tolerance: f64) -> Row {
    Row {
        name: "x".into(),
        n: 3,
        measured: Some(measured),
        bound,
        relation,
        tolerance,
        slack,
        pass: false,
        anchor: String::new(),
        error: None,
    }
}

proptest! {
    #[test]
    fn pass_flag_matches_tolerance(m in -10.0f64..10.0, b in -10.0f64..10.0, tol in 0.0f64..1.0, rel in 0usize..3, abs in any::<bool>()) {
        let relation = [Relation::AtMost, Relation::AtLeast, Relation::Near][rel];
        let slack = if abs { Slack::Absolute } else { Slack::Relative };
        let r = row(m, b, relation, slack, tol);
        let allow = if abs { tol } else { tol * b.abs() };
        let expected = match relation {
            Relation::AtMost => m - b <= allow,
            Relation::AtLeast => b - m <= allow,
            Relation::Near => (m - b).abs() <= allow,
        };
        prop_assert_eq!(r.evaluate(), expected);
    }
}

#[test]
fn missing_measurement_never_passes() {
    let mut r = row(0.0, 1.0, Relation::AtMost, Slack::Absolute, 1.0);
    r.measured = None;
    assert!(!r.evaluate());
    r.measured = Some(f64::NAN);
    assert!(!r.evaluate());
}
