use serde_json::Value;
use switchcert_demo::{reproduce_json, simulate_paths_json, two_regime_spectrum_json, MAX_PATHS};

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.expect("operation succeeds")).unwrap()
}

#[test]
fn spectrum_matches_closed_form() {
    // Ω = [[-2, 1], [1, -4]]: λ₀ = 3 − √2.
    let v = parse(two_regime_spectrum_json(1.0, 1.0, -1.0, -3.0));
    let lambda = v["lambda0"].as_f64().unwrap();
    assert!((lambda - (3.0 - 2f64.sqrt())).abs() < 1e-10);
    assert!(v["g"].as_array().unwrap().iter().all(|g| g.as_f64().unwrap() > 0.0));
    assert!(lambda <= -v["weighted_gamma"].as_f64().unwrap() + 1e-12);
}

#[test]
fn spectrum_rejects_zero_rates() {
    assert!(two_regime_spectrum_json(0.0, 1.0, 0.0, 0.0).is_err());
}

#[test]
fn reproduce_partition_region_edge() {
    let inside = parse(reproduce_json("ex2.1", r#"{"kappa": 1.4}"#));
    let outside = parse(reproduce_json("ex2.1", r#"{"kappa": 1.6}"#));
    assert_eq!(inside["reference"]["holds"], true);
    assert_eq!(outside["reference"]["holds"], false);
    assert_eq!(inside["merged"]["stability"]["verdict"], "AsymptoticallyStableInProbability");
}

#[test]
fn reproduce_rejects_bad_input() {
    assert!(reproduce_json("ex9.9", "").is_err());
    assert!(reproduce_json("cor1", "{not json").is_err());
    assert!(reproduce_json("cor1", r#"{"kappa": 1}"#).is_err());
}

#[test]
fn simulated_paths_are_thinned_and_deterministic() {
    let a = simulate_paths_json(-2.0, 1.0, 0.05, 5.0, 3, 9).unwrap();
    let b = simulate_paths_json(-2.0, 1.0, 0.05, 5.0, 3, 9).unwrap();
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    let n = v["times"].as_array().unwrap().len();
    assert!(n > 100 && n <= 402, "{n} points");
    for path in v["values"].as_array().unwrap() {
        assert_eq!(path.as_array().unwrap().len(), n);
        assert_eq!(path[0], 0.05);
    }
    assert!(simulate_paths_json(-2.0, 1.0, 0.05, 5.0, MAX_PATHS + 1, 9).is_err());
    assert!(simulate_paths_json(-2.0, 1.0, 0.05, -1.0, 3, 9).is_err());
}
