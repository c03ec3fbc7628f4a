use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use jsonschema::JSONSchema;
use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn schema(name: &str) -> JSONSchema {
    let text = fs::read_to_string(root().join("schemas").join(name)).unwrap();
    let value: Value = serde_json::from_str(&text).unwrap();
    JSONSchema::compile(&value).unwrap()
}

fn assert_valid(schema: &JSONSchema, doc: &Value, what: &str) {
    if let Err(errors) = schema.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{what} violates its schema:\n{}", msgs.join("\n"));
    }
}

fn run(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_killing-cmc-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn shipped_configs_match_config_schema() {
    let s = schema("config.schema.json");
    let mut seen = 0;
    for entry in fs::read_dir(root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let doc: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_valid(&s, &doc, &path.display().to_string());
        seen += 1;
    }
    assert!(seen >= 5);
    let bad: Value = serde_json::json!({"model": {"name": "euclidean", "n": 2}, "H0": 1.0});
    assert!(!s.is_valid(&bad));
}

#[test]
fn reports_and_summaries_match_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let report = schema("report.schema.json");
    let summary = schema("summary.schema.json");
    for cfg in ["hemisphere.json", "corollary_c2.json", "growth_euclidean3.json", "custom_gaussian.json"] {
        let path = root().join("configs").join(cfg);
        run(&["verify", "--config", path.to_str().unwrap()], dir.path());
        let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_valid(&report, &doc, cfg);
        assert!(run(&["construct", "--config", path.to_str().unwrap()], dir.path()).status.success());
        let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_valid(&summary, &doc, cfg);
    }
}

#[test]
fn listings_sweeps_and_errors_match_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_killing-cmc-lab"))
        .args(["models", "--json"])
        .output()
        .unwrap();
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&schema("models.schema.json"), &doc, "models");

    let path = root().join("configs/sweep_c.json");
    let out = run(&["sweep", "--json", "--config", path.to_str().unwrap()], dir.path());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&schema("sweep.schema.json"), &doc, "sweep");

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"model": {"name": "torus", "n": 2}, "H0": -1}"#).unwrap();
    let out = run(&["construct", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let doc: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_valid(&schema("error.schema.json"), &doc, "error");
}
