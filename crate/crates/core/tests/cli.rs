use std::fs;
use std::process::{Command, Output};

use ms3d::cli::{cmd_ms3d, cmd_train, Ms3dArgs, TrainArgs, METRICS_HEADER};
use ms3d::data::{save_pgm, ImageData, ImageShape};
use ms3d::gan::{load_checkpoint, GanModel, TrainConfig};
use ms3d::rgflow::{descriptor, RgFilter};

fn ms3d_bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ms3d")).args(args).output().expect("run ms3d")
}

#[test]
fn constant_image_has_zero_total() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gray.pgm");
    let img = ImageData {
        shape: ImageShape::gray(16, 16),
        values: vec![0.5; 256],
    };
    save_pgm(&path, &img).unwrap();
    let args = Ms3dArgs {
        input: path,
        zeta: 2,
        filter: RgFilter::Kadanoff,
        json: false,
    };
    let mut out = Vec::new();
    let profile = cmd_ms3d(&args, &mut out).unwrap();
    assert_eq!(profile.total, 0.0);
    assert!(String::from_utf8(out).unwrap().contains("total: 0"));
}

#[test]
fn kadanoff_total_is_field_variance() {
    let mut raw = vec![0.0; 256];
    for i in [3, 40, 41, 77, 200, 255] {
        raw[i] = 1.0;
    }
    let total = descriptor(&raw, [16, 16, 1], 2, RgFilter::Kadanoff).unwrap().total;
    let mean = raw.iter().sum::<f64>() / 256.0;
    let var = raw.iter().map(|v| v * v).sum::<f64>() / 256.0 - mean * mean;
    assert!((total - var).abs() < 1e-15);
}

#[test]
fn unreadable_input_fails_with_message() {
    let out = ms3d_bin(&["ms3d", "/nonexistent/image.pgm"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent/image.pgm"), "{err}");
}

#[test]
fn bad_usage_exits_one() {
    assert_eq!(ms3d_bin(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ms3d_bin(&["ms3d"]).status.code(), Some(1));
    assert_eq!(ms3d_bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn show_config_prints_parseable_defaults() {
    let out = ms3d_bin(&["train", "--show-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = ms3d::cli::RunConfig::from_toml(&text).unwrap();
    assert_eq!(cfg, ms3d::cli::RunConfig::default());
    for key in ["lambda", "zeta", "rg_filter", "steps", "metric_every", "checkpoint_every"] {
        assert!(text.contains(key), "missing {key}");
    }
}

#[test]
fn invalid_config_lists_offending_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[train]\nzeta = 1\nbatch_size = 0\n").unwrap();
    let out = ms3d_bin(&["train", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("zeta") && err.contains("batch_size"), "{err}");

    fs::write(&path, "[train]\nlamda = 3\n").unwrap();
    let out = ms3d_bin(&["train", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda"));
}

#[test]
fn zero_steps_writes_header_and_initial_weights() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "[train]\nseed = 5\n").unwrap();
    let args = TrainArgs {
        config: Some(config),
        show_config: false,
        steps: Some(0),
        out: Some(dir.path().join("out")),
    };
    cmd_train(&args, &mut Vec::new()).unwrap();
    let csv = fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    assert_eq!(csv.trim_end(), METRICS_HEADER.join(","));
    let (model, step) = load_checkpoint(&dir.path().join("out/final.ckpt")).unwrap();
    assert_eq!(step, 0);
    let init = GanModel::init(&TrainConfig::default().model, 5).unwrap();
    assert_eq!(model, init);
}
