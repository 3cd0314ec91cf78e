use std::process::{Command, Output};

fn drift_adapt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drift-adapt")).args(args).output().unwrap()
}

#[test]
fn weights_command_prints_normalized_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = drift_adapt(&["weights", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let w: Vec<f64> = v["weights"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(w.len(), 3);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(w[0] > w[1] && w[1] > w[2]);
}

#[test]
fn custom_physics_override_defaults() {
    let out = drift_adapt(&["weights", "--source-physics", "0.2,0.9", "--target-physics", "0.2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let w = v["weights"].as_array().unwrap();
    assert_eq!(w.len(), 2);
    assert!(w[0].as_f64().unwrap() > w[1].as_f64().unwrap());
}

#[test]
fn train_without_dataset_names_missing_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = drift_adapt(&["train", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing input"), "{err}");
    assert!(err.contains("manifest.json"), "{err}");
}

#[test]
fn unknown_override_key_is_a_config_error() {
    let out = drift_adapt(&["show-config", "--set", "training.bogus=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("training.bogus"));
}

#[test]
fn show_config_reflects_overrides() {
    let out = drift_adapt(&["show-config", "--seed", "4", "--set", "training.epochs=3"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"], 4);
    assert_eq!(v["training"]["epochs"], 3);
}
