//! CLI contract tests: exit codes, partial-failure behavior, flag plumbing.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ovoscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ovoscope"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn synth_small(dir: &Path, seed: u64) -> std::path::PathBuf {
    let out = ovoscope(&[
        "synth", "--fertile", "3", "--infertile", "3", "--seed",
        &seed.to_string(), "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    dir.join("manifest.json")
}

#[test]
fn usage_error_exits_1_help_exits_0() {
    let bad = ovoscope(&["--definitely-not-a-flag"]);
    assert_eq!(bad.status.code(), Some(1));
    let help = ovoscope(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let sub_help = ovoscope(&["pipeline", "--help"]);
    assert_eq!(sub_help.status.code(), Some(0));
}

#[test]
fn missing_input_file_exits_2() {
    let out = ovoscope(&[
        "extract", "--manifest", "/nonexistent/manifest.json", "--out",
        "/tmp/unused.csv",
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn validation_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "id,mean,entropy,label\nx,1,2,fertile\n").unwrap();
    let model = dir.path().join("model.json");
    let out = ovoscope(&[
        "train", "--features", csv.to_str().unwrap(), "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("variance"), "stderr: {stderr}");
}

#[test]
fn unconverged_training_exits_4_and_still_writes_the_model() {
    // Identical features with opposite labels: the pair step has zero
    // curvature, so no update is ever applied and the KKT conditions can
    // never be met.
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("conflict.csv");
    fs::write(
        &csv,
        "id,mean,entropy,variance,skewness,kurtosis,label\n\
         a,1.0,2.0,3.0,4.0,5.0,fertile\n\
         b,1.0,2.0,3.0,4.0,5.0,infertile\n",
    )
    .unwrap();
    let model = dir.path().join("model.json");
    let out = ovoscope(&[
        "train", "--features", csv.to_str().unwrap(), "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
    assert!(model.exists(), "model must be written despite the warning");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("converge"), "stderr: {stderr}");
}

#[test]
fn corrupt_image_is_skipped_and_signalled() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = synth_small(dir.path(), 11);

    // Append a corrupt entry to the manifest.
    fs::write(dir.path().join("broken.ppm"), b"P6 garbage").unwrap();
    let manifest = fs::read_to_string(&manifest_path).unwrap();
    let patched = manifest.replacen(
        '[',
        "[\n  { \"path\": \"broken.ppm\", \"label\": \"fertile\" },",
        1,
    );
    fs::write(&manifest_path, patched).unwrap();

    let csv = dir.path().join("features.csv");
    let out = ovoscope(&[
        "extract", "--manifest", manifest_path.to_str().unwrap(), "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("broken.ppm"), "stderr: {stderr}");
    // The six good rows still made it out.
    let rows = fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(rows, 7, "header plus six rows");
}

#[test]
fn enhance_mode_none_changes_the_feature_table() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_small(dir.path(), 21);
    let enhanced = dir.path().join("enhanced.csv");
    let plain = dir.path().join("plain.csv");
    let out = ovoscope(&[
        "extract", "--manifest", manifest.to_str().unwrap(), "--out",
        enhanced.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = ovoscope(&[
        "extract", "--manifest", manifest.to_str().unwrap(), "--out",
        plain.to_str().unwrap(), "--enhance", "none",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(
        fs::read(&enhanced).unwrap(),
        fs::read(&plain).unwrap(),
        "enhancement must affect features"
    );
}

#[test]
fn predict_accepts_unknown_labels() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_small(dir.path(), 31);
    let csv = dir.path().join("features.csv");
    let model = dir.path().join("model.json");
    assert_eq!(
        ovoscope(&[
            "extract", "--manifest", manifest.to_str().unwrap(), "--out",
            csv.to_str().unwrap(),
        ])
        .status
        .code(),
        Some(0)
    );
    assert_eq!(
        ovoscope(&[
            "train", "--features", csv.to_str().unwrap(), "--out",
            model.to_str().unwrap(),
        ])
        .status
        .code(),
        Some(0)
    );

    // Blank out the labels, then predict.
    let unlabeled = dir.path().join("unlabeled.csv");
    let text = fs::read_to_string(&csv).unwrap();
    fs::write(
        &unlabeled,
        text.replace(",fertile", ",unknown").replace(",infertile", ",unknown"),
    )
    .unwrap();
    let predictions = dir.path().join("pred.csv");
    let out = ovoscope(&[
        "predict", "--features", unlabeled.to_str().unwrap(), "--model",
        model.to_str().unwrap(), "--out", predictions.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = fs::read_to_string(&predictions).unwrap();
    assert!(text.lines().next().unwrap().ends_with("label,predicted"));
    // The synthetic classes are easy; spot-check one row of each.
    assert!(text.contains("fertile_0000.ppm") && text.contains("infertile_0000.ppm"));
    for line in text.lines().skip(1) {
        assert!(line.ends_with(",fertile") || line.ends_with(",infertile"));
    }
}

#[test]
fn split_manifests_are_loadable_and_disjoint() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_small(dir.path(), 41);
    let train = dir.path().join("train.json");
    let test = dir.path().join("test.json");
    let out = ovoscope(&[
        "split", "--manifest", manifest.to_str().unwrap(), "--out-train",
        train.to_str().unwrap(), "--out-test", test.to_str().unwrap(),
        "--seed", "41",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    let load = |p: &Path| -> Vec<String> {
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        v.as_array()
            .unwrap()
            .iter()
            .map(|e| e["path"].as_str().unwrap().to_string())
            .collect()
    };
    let train_paths = load(&train);
    let test_paths = load(&test);
    assert_eq!(train_paths.len() + test_paths.len(), 6);
    for p in &train_paths {
        assert!(!test_paths.contains(p), "{p} in both sides");
    }
}

#[test]
fn preprocess_writes_a_decodable_pgm() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), 51);
    let out_path = dir.path().join("crop.pgm");
    let input = dir.path().join("fertile_0000.ppm");
    let out = ovoscope(&[
        "preprocess", input.to_str().unwrap(), "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let bytes = fs::read(&out_path).unwrap();
    assert!(bytes.starts_with(b"P5"));
    // Smaller than the 200x280 source.
    let ascii = ovoscope(&[
        "preprocess", input.to_str().unwrap(), "--out", out_path.to_str().unwrap(),
        "--ascii",
    ]);
    assert_eq!(ascii.status.code(), Some(0));
    assert!(fs::read(&out_path).unwrap().starts_with(b"P2"));
}
