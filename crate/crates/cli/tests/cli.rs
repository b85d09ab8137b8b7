use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;
use switchcert::analysis::AnalysisReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_switchcert"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn verdict<'a>(report: &'a Value, theorem: &str) -> &'a Value {
    report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["theorem"] == theorem)
        .unwrap_or_else(|| panic!("no {theorem} verdict"))
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("switchcert-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn malformed_json_exits_2() {
    let path = temp_file("bad.json", "{ \"dimension\": ");
    let out = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_exits_2() {
    assert_eq!(run(&["analyze", "/nonexistent/scenario.json"]).status.code(), Some(2));
}

#[test]
fn invalid_generator_exits_3() {
    let text = r#"{
        "dimension": 1,
        "regimes": {"finite": 2},
        "drift": {"linear": {"coef": [-1, 1]}},
        "diffusion": "zero",
        "generator": {"dense": [[0.5, -0.5], [1, -1]]},
        "test_function": {"power": 1}
    }"#;
    let path = temp_file("neg.json", text);
    let out = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_2() {
    let s = scenario("ex_cor1_stable.json");
    let s = s.to_str().unwrap();
    assert_eq!(run(&["simulate", s, "sup_exceedance", "--paths", "0"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", s, "hitting_time"]).status.code(), Some(2));
    assert_eq!(run(&["reproduce", "ex9.9"]).status.code(), Some(2));
    assert_eq!(run(&["reproduce", "ex2.1", "--gamma", "1"]).status.code(), Some(2));
}

#[test]
fn analyze_power_law_scenario() {
    let out = run(&["analyze", scenario("ex_cor1_stable.json").to_str().unwrap(), "--json"]);
    let report = json(&out);
    for theorem in ["thm_2_1", "thm_2_3"] {
        assert_eq!(verdict(&report, theorem)["verdict"], "AsymptoticallyStableInProbability");
    }
    let notes = verdict(&report, "thm_2_1")["notes"].as_array().unwrap();
    assert!(notes.iter().any(|n| n == "Σμβ = -0.5"));
    assert_eq!(report["merged"]["stability"]["verdict"], "AsymptoticallyStableInProbability");
    let parsed: AnalysisReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(serde_json::to_value(&parsed).unwrap(), report);
}

#[test]
fn analyze_recurrent_scenario() {
    let report = json(&run(&["analyze", scenario("ex4_1_recurrent.json").to_str().unwrap(), "--json"]));
    let v = verdict(&report, "thm_4_2");
    assert_eq!(v["verdict"], "Recurrent");
    assert!((v["certificate"]["lambda0"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn eig_reports_spectral_criteria_only() {
    let report = json(&run(&["eig", scenario("ex3_1_stable.json").to_str().unwrap(), "--json"]));
    let theorems: Vec<&str> = report["verdicts"].as_array().unwrap().iter().map(|v| v["theorem"].as_str().unwrap()).collect();
    assert_eq!(theorems, vec!["thm_3_2"]);
}

#[test]
fn truncation_flag_changes_regime_count() {
    let report = json(&run(&["eig", scenario("ex4_1_recurrent.json").to_str().unwrap(), "--json", "--truncation", "50"]));
    assert_eq!(report["regimes"], 51);
}

#[test]
fn reproduce_sine_birth_death() {
    let accept = json(&run(&["reproduce", "ex2.1", "--kappa", "1.4", "--a2", "3", "--c1", "1", "--json"]));
    let v = verdict(&accept, "thm_2_4");
    assert_eq!(v["verdict"], "AsymptoticallyStableInProbability");
    assert_eq!(v["mode"], "leading_minors_only");
    assert!(v["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("documented discrepancy")));
    assert_eq!(accept["reference"]["holds"], true);

    let text = String::from_utf8(run(&["reproduce", "ex2.1", "--kappa", "1.4"]).stdout).unwrap();
    assert!(text.contains("κ < a₂/(1+c₁) = 1.5: true"), "{text}");

    let semi = json(&run(&["reproduce", "ex2.1", "--kappa", "1.4", "--partition-mode", "semipositivity", "--json"]));
    assert_eq!(verdict(&semi, "thm_2_4")["verdict"], "Inconclusive");
}

#[test]
fn reproduce_countable_examples() {
    let args = ["--a", "3", "--b", "1", "--gamma", "1", "--c", "2", "--json"];
    let r = json(&run(&[&["reproduce", "ex4.1"][..], &args].concat()));
    let v = verdict(&r, "thm_4_2");
    assert_eq!(v["verdict"], "Recurrent");
    assert!((v["certificate"]["lambda0"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let r = json(&run(&[&["reproduce", "ex3.1"][..], &args].concat()));
    assert_eq!(verdict(&r, "thm_3_2")["verdict"], "AsymptoticallyStableInProbability");

    let r = json(&run(&["reproduce", "ex4.2", "--json"]));
    assert_eq!(verdict(&r, "thm_4_2")["verdict"], "Recurrent");
}

#[test]
fn simulate_is_deterministic_across_runs_and_workers() {
    let s = scenario("ex_cor1_unstable.json");
    let base = ["simulate", s.to_str().unwrap(), "sup_exceedance", "--eps", "0.5", "--seed", "42", "--paths", "200", "--T", "5", "--json"];
    let a = run(&base);
    let b = run(&base);
    let c = run(&[&base[..], &["--workers", "1"]].concat());
    let d = run(&[&base[..], &["--workers", "3"]].concat());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert_eq!(a.stdout, d.stdout);
    let e = json(&a);
    assert_eq!(e["n_paths"], 200);
    assert_eq!(e["seed"], 42);
}

#[test]
fn simulate_other_estimators() {
    let s = scenario("ex4_1_recurrent.json");
    let s = s.to_str().unwrap();
    let common = ["--paths", "50", "--T", "2", "--dt", "0.01", "--json"];
    let r = json(&run(&[&["simulate", s, "return_probability", "--r0", "1", "--m0", "3"][..], &common].concat()));
    assert_eq!(r["estimator"], "return_probability");
    let m = json(&run(&[&["simulate", s, "moment_growth", "--times", "0.5,1,1.5,2"][..], &common].concat()));
    assert_eq!(m["times"].as_array().unwrap().len(), 4);
    let c = scenario("ex_cor1_stable.json");
    let r = json(&run(&["simulate", c.to_str().unwrap(), "convergence", "--delta", "0.04", "--paths", "50", "--T", "2", "--json"]));
    assert_eq!(r["estimator"], "convergence");
}

#[test]
fn out_flag_writes_json() {
    let path = std::env::temp_dir().join(format!("switchcert-out-{}.json", std::process::id()));
    let out = run(&["reproduce", "cor1", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(written["reference"]["holds"], true);
    assert!(!String::from_utf8(out.stdout).unwrap().trim_start().starts_with('{'));
}
