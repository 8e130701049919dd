use std::path::{Path, PathBuf};
use std::process::Command;

use polywidth_cli::config::read_document;
use polywidth_cli::{run_experiment, ExperimentConfig, Format};
use proptest::prelude::*;
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polywidth"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn small_duality() -> Value {
    json!({
        "experiment": "duality",
        "seed": 17,
        "body": {"type": "random_polytope", "n": 3, "m": 6, "seed": 2},
        "params": {"k": [1, 2], "epsilon": [0.25, 0.5, 0.75], "candidates": 20000}
    })
}

#[test]
fn json_run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &small_duality().to_string());
    let out = dir.path().join("r.json");
    let status = bin().args(["run"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    // Reports read back through the config parser's value reader.
    let v = read_document(&text, Some(&out)).unwrap();
    assert_eq!(v["config"]["seed"], 17);
    assert_eq!(v["results"].as_array().unwrap().len(), 6);
    assert_eq!(v["summary"]["all_pass"], true);
    assert!(v["provenance"]["wall_time_s"].is_number());
}

#[test]
fn csv_row_count_matches_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &small_duality().to_string());
    let out = dir.path().join("r.csv");
    let status = bin()
        .arg("run")
        .arg(&cfg)
        .args(["--format", "csv", "--workers", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "param.epsilon"));
    assert!(headers.iter().any(|h| h == "flag.primal_width"));
    assert_eq!(reader.records().count(), 2 * 3);
}

#[test]
fn toml_config_with_output_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("facts.json");
    let text = format!(
        "experiment = \"facts\"\nseed = 3\noutput = \"{}\"\n[params]\nc_star = [0.1, 0.2]\nk = [1, 2]\nsamples = 20000\n",
        out.display()
    );
    let cfg = write(dir.path(), "facts.toml", &text);
    let status = bin().arg("run").arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["results"].as_array().unwrap().len(), 4);
    assert_eq!(v["summary"]["all_hold"], true);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "experiment = \"ratio\"\n[body]\ntype = \"cube\"\nn = 2\n[params]\nsigma = -1\n");
    let o = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("params.sigma") && err.contains("line 6"), "{err}");

    let syntax = write(dir.path(), "s.json", "{\"experiment\": }");
    assert_eq!(bin().arg("run").arg(&syntax).output().unwrap().status.code(), Some(2));

    let missing = dir.path().join("nope.json");
    assert_eq!(bin().arg("run").arg(&missing).status().unwrap().code(), Some(4));

    let tau: Vec<f64> = vec![1.0; 30];
    let guard = json!({"experiment": "widths", "body": {"type": "box", "n": 30, "tau": tau},
                         "params": {"method": "coordinate-only"}});
    let g = write(dir.path(), "g.json", &guard.to_string());
    let o = bin().arg("run").arg(&g).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parallelotope_dim"));

    let ok = write(dir.path(), "ok.json", &small_duality().to_string());
    let unwritable = dir.path().join("no_such_dir").join("r.json");
    let status = bin().arg("run").arg(&ok).arg("--out").arg(&unwritable).status().unwrap();
    assert_eq!(status.code(), Some(4));

    assert_eq!(bin().arg("run").arg(&ok).args(["--workers", "0"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["run"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn workers_env_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &small_duality().to_string());
    let out = dir.path().join("r.json");
    let status = bin()
        .env("POLYWIDTH_WORKERS", "2")
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    if v["provenance"]["parallel"] == true {
        assert_eq!(v["provenance"]["workers"], 2);
    }
    let bad = bin().env("POLYWIDTH_WORKERS", "many").arg("run").arg(&cfg).output().unwrap().status;
    assert_eq!(bad.code(), Some(2));
}

fn results_of(config: &Value) -> Value {
    let cfg = ExperimentConfig::from_value(config).unwrap();
    let v: Value = serde_json::from_str(&run_experiment(&cfg).unwrap().to_json()).unwrap();
    json!({"results": v["results"], "summary": v["summary"]})
}

#[test]
fn reruns_are_bit_identical() {
    for config in [
        small_duality(),
        json!({"experiment": "ratio", "seed": 5, "body": {"type": "cube", "n": 3},
               "params": {"sigma": [0.5, 2.0], "samples": 20000, "candidates": 20000}}),
        json!({"experiment": "estimate", "seed": 5, "body": {"type": "cross_polytope", "n": 3},
               "params": {"sigma": [0.1, 1.0], "trials": 2000, "candidates": 20000}}),
    ] {
        assert_eq!(results_of(&config), results_of(&config));
    }
}

#[test]
fn every_experiment_runs_on_a_small_config() {
    let configs = [
        json!({"experiment": "widths", "body": {"type": "ellipsoid", "n": 2, "semi_axes": [2.0, 1.0]}}),
        json!({"experiment": "estimate", "body": {"type": "box", "n": 3, "tau": [1.0, 0.5, 0.1]},
               "params": {"sigma": [0.1, 1.0], "trials": 1000}}),
        json!({"experiment": "lowerbound", "body": {"type": "cube", "n": 2},
               "params": {"sigma": [1.0], "samples": 5000}}),
        json!({"experiment": "theorem4", "body": {"type": "cube", "n": 3},
               "params": {"k": 1, "samples": 5000, "candidates": 5000}}),
        json!({"experiment": "ratio", "body": {"type": "random_polytope", "n": 3, "m": 5, "seed": 1},
               "params": {"samples": 5000, "candidates": 5000}}),
        json!({"experiment": "lipschitz-demo", "params": {"n": 5, "sigma": 0.5, "samples": 5000}}),
        json!({"experiment": "lp-tightness", "params": {"n": 3, "p": 1.5, "k": [1, 2], "samples": 5000}}),
        json!({"experiment": "facts", "params": {"k": 3, "samples": 5000}}),
    ];
    for c in &configs {
        let cfg = ExperimentConfig::from_value(c).unwrap();
        let report = run_experiment(&cfg).unwrap_or_else(|e| panic!("{c}: {e}"));
        assert!(!report.results.is_empty());
        // Every reported number carries a provenance flag.
        for row in &report.results {
            for (k, v) in &row.values {
                if v.is_f64() {
                    assert!(row.flags.contains_key(k), "{} lacks a flag for {k}", report.experiment);
                }
            }
        }
        assert!(report.render(Format::Csv).is_ok());
    }
}

#[test]
fn ratio_example_passes() {
    let v = results_of(&json!({
        "experiment": "ratio", "seed": 1, "body": {"type": "cube", "n": 4},
        "params": {"sigma": 1.0, "c_star": 0.2}
    }));
    let row = &v["results"][0]["values"];
    assert_eq!(row["pass"], true);
    let bound = polywidth::bounds::constants::m_constant(0.2) * 4f64.ln();
    assert!(row["ratio"].as_f64().unwrap() <= bound);
}

fn numeric_key() -> impl Strategy<Value = (&'static str, f64, bool)> {
    // (key, value, whether the value is in range)
    prop_oneof![
        (-5.0..5.0f64).prop_map(|x| ("sigma", x, x > 0.0)),
        (-0.5..0.5f64).prop_map(|x| ("c_star", x, x > 0.0 && x <= 0.2)),
        (-0.5..1.5f64).prop_map(|x| ("epsilon", x, x > 0.0 && x < 1.0)),
        (-3i64..80).prop_map(|x| ("k", x as f64, (0..=64).contains(&x))),
        (0.0..3.0f64).prop_map(|x| ("p", x, (1.0..=2.0).contains(&x))),
        (-2i64..50).prop_map(|x| ("restarts", x as f64, x >= 1)),
    ]
}

fn experiment_taking(key: &str) -> &'static str {
    match key {
        "sigma" => "ratio",
        "c_star" => "theorem4",
        "epsilon" | "k" => "duality",
        "p" => "lp-tightness",
        _ => "widths",
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn fuzzed_params_are_rejected_by_name((key, value, valid) in numeric_key()) {
        let exp = experiment_taking(key);
        let mut cfg = json!({"experiment": exp, "params": {key: value}});
        if exp != "lp-tightness" {
            cfg["body"] = json!({"type": "cube", "n": 3});
        }
        match ExperimentConfig::from_value(&cfg) {
            Ok(_) => prop_assert!(valid, "{key} = {value} accepted"),
            Err(e) => {
                prop_assert!(!valid, "{key} = {value} rejected: {e}");
                prop_assert_eq!(e.path, format!("params.{key}"));
                prop_assert!(e.message.contains(key));
            }
        }
    }

    #[test]
    fn unknown_keys_are_named(key in "[a-z]{3,10}") {
        prop_assume!(!["experiment", "body", "params", "seed", "output"].contains(&key.as_str()));
        let cfg = json!({"experiment": "facts", key.clone(): 1});
        let e = ExperimentConfig::from_value(&cfg).unwrap_err();
        prop_assert_eq!(e.path, key);
    }
}
