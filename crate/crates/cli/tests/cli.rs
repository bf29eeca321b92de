use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn circdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circdim")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

const GOLDEN: &str = r#"{"map": {"family": "arnold_cubic", "target_cf": [1]}, "analysis": {"depth": 8}}"#;

#[test]
fn tune_emits_the_envelope() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "golden.json", GOLDEN);
    let out = circdim(&["tune", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema_version"], "1.0");
    assert_eq!(v["command"], "tune");
    assert_eq!(v["precision_bits"], 256);
    assert_eq!(v["flags"], Value::Array(vec![]));
    let q: Vec<u64> = serde_json::from_value(v["result"]["data"]["quotients"].clone()).unwrap();
    assert_eq!(&q[..8], &[1; 8]);
}

#[test]
fn flags_override_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "golden.json", GOLDEN);
    let out = circdim(&["rotnum", "--config", cfg.to_str().unwrap(), "--depth", "5", "--precision-bits", "192"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["depth"], 5);
    assert_eq!(v["precision_bits"], 192);
}

#[test]
fn malformed_configs_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("broken.json", "{ not json"),
        ("unknown.json", r#"{"map": {"family": "arnold_cubic", "omega": 0.6, "colour": 1}}"#),
        ("family.json", r#"{"map": {"family": "tent", "omega": 0.6}}"#),
        ("depth.json", r#"{"map": {"family": "arnold_cubic", "omega": 0.6}, "analysis": {"depth": 1}}"#),
    ];
    for (name, text) in cases {
        let cfg = write_config(dir.path(), name, text);
        let out = circdim(&["rotnum", "--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{name}");
        let v = json(&out);
        assert_eq!(v["schema_version"], "1.0");
        assert!(v["error"]["kind"].is_string(), "{name}");
    }
    let missing = circdim(&["rotnum", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn bad_gamma_on_the_command_line_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "golden.json", GOLDEN);
    let out = circdim(&["cover", "--config", cfg.to_str().unwrap(), "--gamma", "0.5,1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"]["kind"], "config");
}

#[test]
fn partition_csv_has_the_atom_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "golden.json", GOLDEN);
    let atoms = dir.path().join("atoms.csv");
    let out = circdim(&["partition", "--config", cfg.to_str().unwrap(), "--depth", "6", "--format", "csv", "--out", atoms.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&atoms).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("generation,index,left,right,length"));
    let rows: Vec<&str> = lines.collect();
    // q_6 + q_5 atoms for the golden map
    assert_eq!(rows.len(), 13 + 8);
    let total: f64 = rows.iter().map(|r| r.split(',').nth(4).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn commands_without_csv_form_fail() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "golden.json", GOLDEN);
    let out = circdim(&["tune", "--config", cfg.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "golden.json", GOLDEN);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("dim{run}.json"));
        let out = circdim(&["dimension", "--config", cfg.to_str().unwrap(), "--samples", "64", "--seed", "11", "--out", path.to_str().unwrap()]);
        assert!(matches!(out.status.code(), Some(0 | 2)));
        assert!(out.stdout.is_empty());
        outputs.push(std::fs::read(path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let v: Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(v["result"]["data"]["estimate"]["samples_requested"], 64);
}

#[test]
fn soft_flags_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "golden.json", GOLDEN);
    // 20 samples cannot give a confident estimate
    let out = circdim(&["dimension", "--config", cfg.to_str().unwrap(), "--samples", "20"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert!(!v["flags"].as_array().unwrap().is_empty());
}

#[test]
fn floats_are_decimal_strings() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "golden.json", GOLDEN);
    let out = circdim(&["theorem1", "--config", cfg.to_str().unwrap()]);
    assert!(matches!(out.status.code(), Some(0 | 2)));
    let v = json(&out);
    let lower = v["result"]["data"]["bounds"]["lower"].as_str().unwrap();
    assert!(lower.parse::<f64>().unwrap() > 0.0);
    assert_eq!(v["result"]["data"]["bounds"]["upper"], "1");
}

#[test]
fn map_flags_replace_the_config_file() {
    let out = circdim(&["tune", "--family", "arnold_cubic", "--target-cf", "1,2", "--depth", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let q: Vec<u64> = serde_json::from_value(json(&out)["result"]["data"]["quotients"].clone()).unwrap();
    assert_eq!(&q[..6], &[1, 2, 1, 2, 1, 2]);

    let incomplete = circdim(&["rotnum", "--family", "arnold_cubic"]);
    assert_eq!(incomplete.status.code(), Some(1));
}

#[test]
fn level_selection() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "golden.json", GOLDEN);
    let out = circdim(&["realbounds", "--config", cfg.to_str().unwrap(), "--levels", "3..6"]);
    let v = json(&out);
    let levels: Vec<u64> = v["result"]["data"]["levels"].as_array().unwrap().iter().map(|l| l["level"].as_u64().unwrap()).collect();
    assert_eq!(levels, vec![3, 4, 5, 6]);

    let out = circdim(&["bridges", "--config", cfg.to_str().unwrap(), "--level", "4"]);
    let v = json(&out);
    let bridges = v["result"]["data"].as_array().unwrap();
    assert_eq!(bridges.len(), 1);
    assert_eq!(bridges[0]["level"], 4);

    let out = circdim(&["realbounds", "--config", cfg.to_str().unwrap(), "--levels", "3..8"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dimension_csv_lists_every_exponent() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "rotation.json", r#"{"map": {"family": "rigid_rotation", "target_cf": [1]}, "analysis": {"depth": 8}}"#);
    let out = circdim(&["dimension", "--config", cfg.to_str().unwrap(), "--samples", "10", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample,level,exponent"));
    let rows: Vec<&str> = lines.collect();
    // levels 2..=8 for each of the ten samples
    assert_eq!(rows.len(), 70);
    assert!(rows.iter().all(|r| (r.rsplit(',').next().unwrap().parse::<f64>().unwrap() - 1.0).abs() < 1e-9));
}
