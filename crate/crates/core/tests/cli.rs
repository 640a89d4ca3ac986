use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use memlab::cli::{RUN_REPORT_SCHEMA, SWEEP_REPORT_SCHEMA};
use memlab::expdsl::PRESETS;
use serde_json::Value;

fn memlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memlab"))
        .args(args)
        .env("MEMLAB_OUT", out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema: &str, instance: &Value) {
    let schema: Value = serde_json::from_str(schema).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

#[test]
fn list_is_sorted_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let o = memlab(&["list"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text
        .lines()
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(names.len(), 9);
    assert!(names.contains(&"fig16_cap"));
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn run_preset_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = memlab(&["run", "--preset", "fig2_3"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("fig2_3.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,u,y,v,i,phi,q,state0"));
    assert_eq!(lines.count(), 2 * 100_000 + 1);
    let report = json(&dir.path().join("fig2_3.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["phi_q"]["kind"], "SingleValued");
    assert!(report.get("wall_time_s").is_none());
}

#[test]
fn out_flag_overrides_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let flag = flag_dir.path().join("nested");
    let o = memlab(
        &[
            "run",
            "--preset",
            "fig8_9_switched",
            "--out",
            flag.to_str().unwrap(),
        ],
        env_dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(flag.join("fig8_9_switched.csv").exists());
    assert!(!env_dir.path().join("fig8_9_switched.csv").exists());
}

#[test]
fn timing_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let o = memlab(
        &["run", "--preset", "fig8_9_switched", "--timing"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(json(&dir.path().join("fig8_9_switched.json"))["wall_time_s"].is_number());
}

#[test]
fn missing_file_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = memlab(&["run", "/no/such/experiment.mlab"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/experiment.mlab"));
}

#[test]
fn parse_error_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.mlab");
    fs::write(&file, "experiment bad\nmodel thermistor { delta=0.1mW }\ndrive current sinusoid { amplitude=1mA frequency=1Hz }\n").unwrap();
    let o = memlab(&["run", file.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.mlab: 2:"), "{}", stderr(&o));
}

#[test]
fn dt_override_violation_names_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let o = memlab(
        &["run", "--preset", "fig6_7", "--dt-override", "1e-1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dt <= period/200"), "{}", stderr(&o));
}

#[test]
fn unknown_preset_and_bad_arguments_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        memlab(&["run", "--preset", "nope"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(memlab(&["run"], dir.path()).status.code(), Some(2));
    assert_eq!(memlab(&["frobnicate"], dir.path()).status.code(), Some(2));
}

#[test]
fn simulation_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("never_settles.mlab");
    fs::write(
        &file,
        "experiment never_settles\nmodel thermistor { }\ndrive current sinusoid { amplitude=0.5mA frequency=10Hz }\n\
         sim { dt=5e-4 transient_cycles=0 record_cycles=1 steady_state_rel_tol=1e-15 }\n",
    )
    .unwrap();
    let o = memlab(&["run", file.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("steady state"));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(
            memlab(&["run", "--preset", "fig16_cap"], d.path())
                .status
                .code(),
            Some(0)
        );
        assert_eq!(
            memlab(&["sweep", "--preset", "fig12_13_sweep"], d.path())
                .status
                .code(),
            Some(0)
        );
    }
    for f in [
        "fig16_cap.csv",
        "fig16_cap.json",
        "fig12_13_sweep_sweep.csv",
        "fig12_13_sweep_sweep.json",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn sweep_preset_has_four_decreasing_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = memlab(&["sweep", "--preset", "fig12_13_sweep"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("fig12_13_sweep_sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "f,normalized_area,kind,dq_per_cycle,dphi_per_cycle"
    );
    assert_eq!(lines.len(), 5);
    let report = json(&dir.path().join("fig12_13_sweep_sweep.json"));
    assert_eq!(report["monotonicity"], "strictly decreasing");
    assert_valid(SWEEP_REPORT_SCHEMA, &report);
}

fn sweep_file(dir: &Path, freqs: &str) -> String {
    let file = dir.join("sweep.mlab");
    let text = memlab::expdsl::preset_source("fig12_13_sweep")
        .unwrap()
        .replace(
            "sweep(0.1Hz, 0.2Hz, 0.4Hz, 0.8Hz)",
            &format!("sweep({freqs})"),
        );
    fs::write(&file, text).unwrap();
    file.to_str().unwrap().to_string()
}

#[test]
fn single_frequency_sweep_is_trivially_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let file = sweep_file(dir.path(), "0.2Hz");
    let o = memlab(&["sweep", &file], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&dir.path().join("fig12_13_sweep_sweep.json"));
    assert_eq!(report["rows"].as_array().unwrap().len(), 1);
    assert_eq!(report["monotonicity"], "trivially true");
}

#[test]
fn unordered_sweep_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = sweep_file(dir.path(), "0.8Hz, 0.1Hz");
    let o = memlab(&["sweep", &file], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("frequencies must be strictly increasing"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn sweep_without_sweep_analysis_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        memlab(&["sweep", "--preset", "fig4_5"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn every_preset_report_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    for (name, _, _) in PRESETS {
        let o = memlab(&["run", "--preset", name], dir.path());
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert_valid(
            RUN_REPORT_SCHEMA,
            &json(&dir.path().join(format!("{name}.json"))),
        );
    }
}

#[test]
fn run_cli_returns_exit_codes() {
    assert_eq!(memlab::cli::run_cli(["memlab", "list"]), 0);
    assert_eq!(
        memlab::cli::run_cli(["memlab", "run", "--preset", "missing"]),
        2
    );
}
