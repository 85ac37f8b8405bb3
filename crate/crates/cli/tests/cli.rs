use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ensemble-qc");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("ENSEMBLE_QC_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn value(csv: &str, key: &str) -> String {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("no {key} in\n{csv}"))
        .to_string()
}

#[test]
fn ghz_analytic_summary() {
    let out = run(&["ghz", "--p", "0.01", "--eta", "1", "--mode", "analytic"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(value(&text, "success_probability"), "0.031250");
    assert_eq!(value(&text, "fidelity"), "1.000000");
}

#[test]
fn ghz_json_output() {
    let out = run(&["ghz", "--cutoff", "2", "--eta", "0.8", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert!((v["loss_rate"].as_f64().unwrap() - (1.0 - 1.0 / 1.2)).abs() < 1e-12);
}

#[test]
fn sweep_has_a_threshold_row() {
    let out = run(&["sweep-loss", "--eta-grid", "0:1:0.05"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("eta,r,g,margin"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 22);
    assert!(text.contains("0.666667,0.250000,0.500000,0.000000"), "{text}");
    for r in &rows {
        if (r[0] - 2.0 / 3.0).abs() > 1e-6 {
            assert_eq!(r[3] > 0.0, r[0] > 2.0 / 3.0, "{r:?}");
        }
    }
}

#[test]
fn grow_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("g{i}.csv"))).collect();
    for p in &paths {
        let out = run(&["grow", "--N", "20", "--p", "0.05", "--trials", "500", "--seed", "3", "--out", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("N,p,eta,trials,mean_pulses,stderr,mean_attempts\n20,0.050000,1.000000,500,"));
}

#[test]
fn grow_mean_matches_ledger() {
    let out = run(&["grow", "--N", "50", "--p", "0.01", "--trials", "100000", "--seed", "7", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mean = v["stats"]["pulses"]["mean"].as_f64().unwrap();
    let target = 1536.0 * 50.0 / 0.01;
    assert!((mean / target - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn invalid_config_exits_2() {
    assert_eq!(run(&["ghz", "--p", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["cz", "--mode", "sampled"]).status.code(), Some(2));
    assert_eq!(run(&["grow", "--N", "10"]).status.code(), Some(2));
    assert_eq!(run(&["eme", "--cutoff", "9"]).status.code(), Some(2));
    assert_eq!(run(&["ghz", "--eta", "0.9", "--eta-d", "0.9"]).status.code(), Some(2));
    assert_eq!(run(&["teleport"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"eta_e": 0.5, "cutoff": 2, "format": "json"}"#).unwrap();
    let c = config.to_str().unwrap();

    let from_file: serde_json::Value = serde_json::from_slice(&run(&["cz", "--config", c]).stdout).unwrap();
    assert_eq!(from_file["eta_e"], 0.5);
    assert_eq!(from_file["cutoff"], 2);

    let overridden: serde_json::Value =
        serde_json::from_slice(&run(&["cz", "--config", c, "--eta-e", "0.9"]).stdout).unwrap();
    assert_eq!(overridden["eta_e"], 0.9);
    assert!((overridden["p_success"].as_f64().unwrap() - 0.5 * 0.81).abs() < 1e-10);

    std::fs::write(&config, r#"{"etta": 0.5}"#).unwrap();
    assert_eq!(run(&["cz", "--config", c]).status.code(), Some(2));
}

#[test]
fn env_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["eme", "--p", "0.05"])
        .env("ENSEMBLE_QC_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(Path::new(dir.path()).join("eme.csv")).unwrap();
    assert!(text.starts_with("quantity,value\n"));
    assert!((value(&text, "fidelity").parse::<f64>().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn sampled_cz_counts_add_up() {
    let out = run(&["cz", "--mode", "sampled", "--seed", "5", "--trials", "400", "--eta", "0.9"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let n = |k: &str| value(&text, k).parse::<u64>().unwrap();
    assert_eq!(n("successes") + n("failures") + n("indeterminate"), 400);
    assert!(n("indeterminate") > 0);
}
