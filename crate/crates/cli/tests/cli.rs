use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

use sephier_cli::{replay, run, Check, Report, RunConfig};

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write(name: &str, text: &str) -> PathBuf {
    let path = scratch(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn sephier(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sephier")).args(args).env_remove("SEPHIER_THREADS").output().unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

const SMALL_GRID: &str = r#""grid":{"n":16,"dt":1e-4,"steps":20,"checkpoints":4}"#;

#[test]
fn certify_linearity_on_linear_preset_exits_zero() {
    let out_path = scratch("certify.json");
    let out = sephier(&["certify-linearity", "--samples", "20", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: Report = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(report.checks.len(), 1);
    assert_eq!(report.checks[0].verdict, "linear-consistent");
    assert!(report.checks[0].k_hat.is_some());
}

#[test]
fn expect_fail_inverts_exit_status() {
    let config = write("dg.json", r#"{"hierarchy":{"preset":"doebner_goldin","gamma":0.3},"samples":20}"#);
    let config = config.to_str().unwrap();
    let failing = sephier(&["sym-derivation", "--config", config]);
    assert_eq!(failing.status.code(), Some(2));
    let report: Report = serde_json::from_slice(&failing.stdout).unwrap();
    assert!(!report.pass);
    assert!(report.checks[0].value > 1e-3);
    let expected = sephier(&["sym-derivation", "--config", config, "--expect", "fail"]);
    assert_eq!(expected.status.code(), Some(0));
    // plain derivation holds for this hierarchy, so expecting failure is itself a failure
    let plain = sephier(&["plain-derivation", "--config", config, "--expect", "fail"]);
    assert_eq!(plain.status.code(), Some(2));
}

#[test]
fn missing_hierarchy_file_is_an_operational_error() {
    let config = write("missing.json", r#"{"hierarchy":{"file":"does-not-exist.json"}}"#);
    let out = sephier(&["all", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "io");
    assert!(err["detail"]["path"].as_str().unwrap().ends_with("does-not-exist.json"));
}

#[test]
fn malformed_config_and_invalid_hierarchy_are_reported() {
    let config = write("bad.json", r#"{"samples":"many"}"#);
    let out = sephier(&["plain-derivation", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "config");

    write("bad-hier.json", r#"{"f":0,"d":1,"K":1,"m":1,"operators":{"1":["u[0]((2))"]}}"#);
    let config = write("bad-hier-config.json", r#"{"hierarchy":{"file":"bad-hier.json"}}"#);
    let out = sephier(&["plain-derivation", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "hierarchy");
}

#[test]
fn evolution_domain_errors_carry_step_and_point() {
    // the antisymmetric product vanishes on the diagonal
    let config = write(
        "floor.json",
        &format!(r#"{{"hierarchy":{{"preset":"doebner_goldin","gamma":0.3}},"spec":{{"f":1}},{SMALL_GRID}}}"#),
    );
    let out = sephier(&["evolve-gap", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "evolution");
    assert_eq!(err["detail"]["step"], 0);
    assert_eq!(err["detail"]["point"], serde_json::json!([0, 0]));
}

#[test]
fn hierarchy_files_and_spec_overrides() {
    write(
        "free.json",
        r#"{"f":0,"d":1,"K":2,"m":1,"operators":{"1":["-u[0]((2))"],"2":["-u[0,0]((2);(0)) - u[0,0]((0);(2))"]}}"#,
    );
    let config = write("free-config.json", r#"{"hierarchy":{"file":"free.json"},"samples":20,"spec":{"f":1}}"#);
    let out = sephier(&["all", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Report = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.hierarchy.f, 1);
    // no H_4, so the N = 2 conglomerate is skipped
    let skipped: Vec<&str> = report.skipped.iter().map(|s| s.check.as_str()).collect();
    assert_eq!(skipped, ["conglomerate", "gauge-demo"]);
    assert_eq!(report.checks.len(), 7);
    assert!(report.checks.iter().all(|c| c.pass));
}

#[test]
fn csv_trace_is_written() {
    let config = write("trace.json", &format!(r#"{{{SMALL_GRID}}}"#));
    let csv = scratch("trace.csv");
    let out = sephier(&["evolve-gap", "--config", config.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "check,product,step,t,gap,norm");
    assert_eq!(lines.len(), 1 + 2 * 4);
    assert!(lines[8].starts_with("evolve-gap,sym,20,"));
}

#[test]
fn thread_count_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_sephier"))
        .args(["flow-invariance", "--samples", "10"])
        .env("SEPHIER_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = Command::new(env!("CARGO_BIN_EXE_sephier"))
        .args(["flow-invariance"])
        .env("SEPHIER_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn replay_subcommand_reproduces_failing_witnesses() {
    let config = write(
        "replay.json",
        &format!(r#"{{"hierarchy":{{"preset":"cubic_nls"}},"samples":20,"expect":"fail",{SMALL_GRID}}}"#),
    );
    let report_path = scratch("replay-report.json");
    let out = sephier(&["all", "--config", config.to_str().unwrap(), "--out", report_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: Report = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!(report.checks.iter().any(|c| !c.pass));
    let replayed = sephier(&["replay", report_path.to_str().unwrap()]);
    assert_eq!(replayed.status.code(), Some(0));
    let outcomes: Value = serde_json::from_slice(&replayed.stdout).unwrap();
    for (o, c) in outcomes.as_array().unwrap().iter().zip(&report.checks) {
        assert_eq!(o["name"], c.name.as_str());
        assert!((o["replayed"].as_f64().unwrap() - c.value).abs() <= 1e-12);
    }
}

#[test]
fn reports_are_deterministic_apart_from_timing() {
    let config = RunConfig::from_json(&format!(
        r#"{{"hierarchy":{{"preset":"doebner_goldin","gamma":0.3}},"samples":25,"seed":7,{SMALL_GRID}}}"#
    ))
    .unwrap();
    let a = run(&config).unwrap();
    let b = run(&config).unwrap();
    assert_eq!(a.report.without_timing().to_json(), b.report.without_timing().to_json());
    assert_eq!(a.trace, b.trace);
    let other = RunConfig { seed: 8, ..config };
    assert_ne!(run(&other).unwrap().report.without_timing().checks, a.report.without_timing().checks);
}

#[test]
fn library_replay_round_trips_through_json() {
    let config = RunConfig::from_json(
        r#"{"check":"certify-linearity","hierarchy":{"preset":"doebner_goldin","gamma":0.3},"samples":30}"#,
    )
    .unwrap();
    assert_eq!(config.check, Check::CertifyLinearity);
    let outcome = run(&config).unwrap();
    assert_eq!(outcome.report.checks[0].verdict, "nonlinear");
    let parsed = Report::from_json(&outcome.report.to_json()).unwrap();
    assert_eq!(parsed, outcome.report);
    for o in replay(&parsed).unwrap() {
        assert!(o.agree, "{o:?}");
        assert_eq!(o.replayed.to_bits(), o.reported.to_bits());
    }
}
