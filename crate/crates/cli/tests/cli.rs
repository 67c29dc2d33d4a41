use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vendorest"))
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const MAP: &str = "cell,subregion,borough\na,north,X\nb,north,X\nc,south,Y\n";

fn toy_records() -> String {
    let mut s = String::from("id,vendor_class,has_credential,veteran,cell\n");
    let mut id = 0;
    for (cell, n0, n1) in [("a", 20, 5), ("b", 12, 6), ("c", 8, 4), ("", 3, 2)] {
        for (count, cred) in [(n1, 1), (n0, 0)] {
            for _ in 0..count {
                id += 1;
                s.push_str(&format!("r{id},food,{cred},0,{cell}\n"));
            }
        }
    }
    for i in 0..12 {
        s.push_str(&format!("m{i},merchandise,{},0,{}\n", i % 2, ["a", "b", "c"][i % 3]));
    }
    s.push_str("v1,merchandise,0,1,b\n");
    s
}

fn toy_config(dir: &Path, records: &str) -> PathBuf {
    write(dir, "records.csv", records);
    write(dir, "map.csv", MAP);
    write(
        dir,
        "run.json",
        r#"{"records": "records.csv", "partition_map": "map.csv", "scenarios": [{"name": "id", "kind": "identity"}]}"#,
    )
}

#[test]
fn estimate_json_on_toy_survey() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path(), &toy_records());
    let o = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let city = rows.last().unwrap();
    assert_eq!(city["kind"], "city");
    // N1 * n0 / n1 + N1 per class: food 5100 * 43 / 17 + 5100,
    // merchandise (veteran excluded) 853 * 6 / 6 + 853
    let pop = city["population"].as_f64().unwrap();
    assert!((pop - (18000.0 + 1706.0)).abs() < 1e-9, "{pop}");
    assert_eq!(v["degenerate"], false);
    assert_eq!(v["veteran_merchandise_respondents"], 1);
    assert_eq!(v["unknown_location_respondents"], 5);
}

#[test]
fn estimate_output_is_byte_stable_and_out_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path(), &toy_records());
    for fmt in ["json", "csv", "md"] {
        let a = run(&["estimate", "--config", cfg.to_str().unwrap(), "--format", fmt]);
        let b = run(&["estimate", "--config", cfg.to_str().unwrap(), "--format", fmt]);
        assert_eq!(code(&a), 0);
        assert_eq!(a.stdout, b.stdout, "{fmt}");
        let out = dir.path().join(format!("out.{fmt}"));
        let c = run(&["estimate", "--config", cfg.to_str().unwrap(), "--format", fmt, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&c), 0);
        assert!(c.stdout.is_empty());
        let file = std::fs::read_to_string(&out).unwrap();
        assert_eq!(file.trim_end(), stdout(&a).trim_end(), "{fmt}");
    }
}

#[test]
fn empty_records_exit_3_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path(), "id,vendor_class,has_credential,veteran,cell\n");
    let o = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["degenerate"], true);
    assert!(!v["rows"].as_array().unwrap().is_empty());
}

#[test]
fn reconstructed_survey_is_degenerate_in_two_rows() {
    let o = run(&["estimate", "--config", data("nyc/estimate.json").to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code(&o), 3);
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("city,") && l.contains("21857")), "{text}");
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // unmatched cell
    let cfg = toy_config(dir.path(), "id,vendor_class,has_credential,veteran,cell\nx,food,1,0,zzz\n");
    let o = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2"), "{err}");

    // bad boolean
    let cfg = toy_config(dir.path(), "id,vendor_class,has_credential,veteran,cell\nx,food,maybe,0,a\n");
    assert_eq!(code(&run(&["estimate", "--config", cfg.to_str().unwrap()])), 2);

    // unknown config key
    let bad = write(dir.path(), "bad.json", r#"{"records": "r.csv", "partition_map": "m.csv", "nope": 1}"#);
    assert_eq!(code(&run(&["estimate", "--config", bad.to_str().unwrap()])), 2);

    // missing config file
    assert_eq!(code(&run(&["estimate", "--config", "/nonexistent/x.json"])), 2);

    // usage error
    assert_eq!(code(&run(&["estimate"])), 2);
    assert_eq!(code(&run(&["estimate", "--config", cfg.to_str().unwrap(), "--format", "xml"])), 2);
}

#[test]
fn cap_violation_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "records.csv", &toy_records());
    write(dir.path(), "map.csv", MAP);
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"records": "records.csv", "partition_map": "map.csv", "caps": {"food": 3, "merchandise": 853}}"#,
    );
    assert_eq!(code(&run(&["estimate", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn weighted_identity_matches_unweighted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path(), &toy_records());
    let o = run(&["weighted", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let classes = v["scenarios"][0]["classes"].as_array().unwrap();
    for c in classes {
        let bf = c["bias_factor"].as_f64().unwrap();
        assert!((bf - 1.0).abs() < 1e-12);
        assert!((c["adjusted_total"].as_f64().unwrap() - c["unweighted_total"].as_f64().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn weighted_needs_a_scenario() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "records.csv", &toy_records());
    write(dir.path(), "map.csv", MAP);
    let cfg = write(dir.path(), "run.json", r#"{"records": "records.csv", "partition_map": "map.csv"}"#);
    assert_eq!(code(&run(&["weighted", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn simulate_is_seeded() {
    let cfg = data("toy/scenario.json");
    let c = cfg.to_str().unwrap();
    let a = run(&["simulate", "--config", c, "--format", "csv"]);
    let b = run(&["simulate", "--config", c, "--format", "csv"]);
    let d = run(&["simulate", "--config", c, "--format", "csv", "--seed", "8"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, d.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().next(), Some("replicate,cell,n0,n1"));
    // 5 replicates x (3 cells + unknown slot)
    assert_eq!(text.lines().count(), 1 + 5 * 4);

    let j = run(&["simulate", "--config", c, "--model", "1"]);
    let v: Value = serde_json::from_str(&stdout(&j)).unwrap();
    assert_eq!(v["model"], "1");
    for r in v["replicates"].as_array().unwrap() {
        let n1: u64 = r["n1"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).sum();
        assert!(n1 <= 500);
    }
}

#[test]
fn coverage_writes_rows_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(data("toy/coverage.json")).unwrap()).unwrap();
    cfg["scenario"]["replicates"] = 200.into();
    let path = write(dir.path(), "cov.json", &cfg.to_string());
    let rows = dir.path().join("rows.csv");
    let o = run(&["coverage", "--config", path.to_str().unwrap(), "--rows", rows.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["seed"], 3);
    assert_eq!(v["estimators"].as_array().unwrap().len(), 3);
    let text = std::fs::read_to_string(&rows).unwrap();
    assert!(text.lines().count() > 200);

    let csv = run(&["coverage", "--config", path.to_str().unwrap(), "--format", "csv", "--seed", "3"]);
    assert_eq!(stdout(&csv), text);
}

#[test]
fn coverage_rejects_too_few_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(data("toy/coverage.json")).unwrap()).unwrap();
    cfg["scenario"]["replicates"] = 10.into();
    let path = write(dir.path(), "cov.json", &cfg.to_string());
    assert_eq!(code(&run(&["coverage", "--config", path.to_str().unwrap()])), 2);
}

#[test]
fn fit_summary_and_draws() {
    let dir = tempfile::tempdir().unwrap();
    let draws = dir.path().join("draws.csv");
    let c = data("toy/fit.json");
    let args = [
        "fit", "--config", c.to_str().unwrap(), "--chains", "2", "--warmup", "300", "--iters", "200", "--seed", "5",
    ];
    let o = bin().args(args).args(["--draws", draws.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["model"], "4");
    let total = &v["total"];
    let (lo, mean, hi) = (total["lower"].as_f64().unwrap(), total["mean"].as_f64().unwrap(), total["upper"].as_f64().unwrap());
    // the total can never fall below the observed credentialed population
    assert!(300.0 <= lo && lo <= mean && mean <= hi);
    assert_eq!(std::fs::read_to_string(&draws).unwrap().lines().count(), 1 + 2 * 200);

    let again = bin().args(args).output().unwrap();
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn fit_rejects_mismatched_k() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "fit.json", r#"{"K": 3, "n0": [1, 2], "n1": [1, 1], "N1": 10}"#);
    assert_eq!(code(&run(&["fit", "--config", p.to_str().unwrap()])), 2);
}

#[test]
fn model5_requires_positive_counts_and_rho() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "fit.json", r#"{"n0": [4, 2], "n1": [1, 1], "N1": 10}"#);
    assert_eq!(code(&run(&["fit", "--config", p.to_str().unwrap(), "--model", "5"])), 2);
}
