//! End-to-end runs of the `eyefresh` binary on small synthetic datasets.

use std::path::Path;
use std::process::{Command, Output};

use eyefresh_core::RasterImage;
use serde_json::Value;
use tempfile::TempDir;

fn eyefresh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eyefresh"))
        .args(args)
        .env_remove("EYEFRESH_CONFIG")
        .env_remove("EYEFRESH_SEED")
        .env_remove("EYEFRESH_MODEL")
        .env_remove("EYEFRESH_FEATURE_SET")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = eyefresh(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &TempDir, per_class: usize) -> std::path::PathBuf {
    let data = dir.path().join("data");
    ok(&[
        "synth",
        p(&data),
        "--per-class",
        &per_class.to_string(),
        "--size",
        "80",
        "--seed",
        "7",
    ]);
    data
}

#[test]
fn split_extract_train_eval() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 10);
    let split = dir.path().join("split.json");
    let out = ok(&["split", p(&data), "-o", p(&split), "--seed", "3"]);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["counts"]["test"]["Fresh"], 2);

    let feats = dir.path().join("feats");
    ok(&[
        "extract",
        p(&data),
        "-o",
        p(&feats),
        "--split",
        p(&split),
        "--feature-set",
        "FS17",
    ]);
    let train_csv = std::fs::read_to_string(feats.join("train.csv")).unwrap();
    let header: Vec<&str> = train_csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 162);
    assert!(header.contains(&"label"));

    let manifest: Value =
        serde_json::from_slice(&std::fs::read(feats.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["feature_set"], "FS17");
    assert_eq!(manifest["n_columns"], 161);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    let n_rows: usize = ["train", "val", "test"]
        .iter()
        .map(|s| manifest["rows"][s].as_array().unwrap().len())
        .sum();
    assert_eq!(n_rows, 30);

    // a second run with the same inputs is byte-identical
    let again = dir.path().join("again");
    ok(&[
        "extract",
        p(&data),
        "-o",
        p(&again),
        "--split",
        p(&split),
        "--feature-set",
        "FS17",
        "--jobs",
        "1",
    ]);
    for name in ["train.csv", "val.csv", "test.csv", "manifest.json"] {
        assert_eq!(
            std::fs::read(feats.join(name)).unwrap(),
            std::fs::read(again.join(name)).unwrap(),
            "{name}"
        );
    }

    let model = dir.path().join("model.json");
    ok(&[
        "train",
        "--train",
        p(&feats.join("train.csv")),
        "--model",
        "rf",
        "--param",
        "n_trees=20",
        "-o",
        p(&model),
    ]);
    let out = ok(&[
        "eval",
        "--test",
        p(&feats.join("test.csv")),
        "--model-file",
        p(&model),
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let report: Value = serde_json::from_str(&text[..=text.rfind('}').unwrap()]).unwrap();
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(report["n_test"], 6);
    assert_eq!(report["feature_set"], "FS17");
}

#[test]
fn segmented_extraction_with_timing() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 4);
    let feats = dir.path().join("feats");
    let out = ok(&[
        "extract",
        p(&data),
        "-o",
        p(&feats),
        "--feature-set",
        "FS9",
        "--segmented",
        "--timing",
        "--test-frac",
        "0.25",
        "--val-frac",
        "0",
    ]);
    assert!(stderr(&out).contains("GLCM"));
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(feats.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["segmented"], true);
    assert!(manifest["timing"].is_object());
    assert!(manifest["segmentation_failures"]
        .as_array()
        .unwrap()
        .is_empty());
    assert_eq!(manifest["rows"]["test"].as_array().unwrap().len(), 3);
}

#[test]
fn segment_writes_image_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 1);
    let seg = dir.path().join("seg");
    ok(&["segment", p(&data), "-o", p(&seg)]);
    let sidecar = seg.join("fresh").join("fresh_0000.json");
    assert!(seg.join("fresh").join("fresh_0000.png").is_file());
    let record: Value = serde_json::from_slice(&std::fs::read(sidecar).unwrap()).unwrap();
    let r = record["radius"].as_f64().unwrap();
    assert!(r > 15.0 && r < 35.0, "radius {r}");
}

#[test]
fn flat_images_exceed_segmentation_failure_rate() {
    let dir = TempDir::new().unwrap();
    let flat = dir.path().join("flat");
    std::fs::create_dir_all(&flat).unwrap();
    for i in 0..3 {
        let img = RasterImage::from_fn(64, 64, |_, _| [128; 3]).unwrap();
        img.save_png(&flat.join(format!("f{i}.png"))).unwrap();
    }
    let out = eyefresh(&["segment", p(&flat), "-o", p(&dir.path().join("seg"))]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("threshold"));
}

#[test]
fn unsupported_model_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("x.csv");
    std::fs::write(&csv, "a,label\n1,fresh\n").unwrap();
    let out = eyefresh(&[
        "train",
        "--train",
        p(&csv),
        "--model",
        "svm",
        "-o",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("LightGBM"), "{}", stderr(&out));
}

#[test]
fn missing_root_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let out = eyefresh(&[
        "extract",
        p(&dir.path().join("nope")),
        "-o",
        p(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_config_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 1);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"feature_set": "FS17", "no_such_field": 1}"#).unwrap();
    let out = eyefresh(&[
        "--config",
        p(&cfg),
        "extract",
        p(&data),
        "-o",
        p(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    std::fs::write(&cfg, r#"{"resize": "8x8"}"#).unwrap();
    let out = eyefresh(&["--config", p(&cfg), "fuse-info", "FS1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fuse_info_reports_dimensionality() {
    let out = ok(&["fuse-info", "FS17"]);
    let info: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(info["dimensionality"], 161);
    assert_eq!(info["columns"].as_array().unwrap().len(), 161);

    let out = ok(&["fuse-info"]);
    let all: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(all.as_array().unwrap().len(), 17);
}
