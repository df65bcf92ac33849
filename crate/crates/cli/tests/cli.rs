use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sticker_forge_core::imaging::{save_png, write_annotation, PixelImage, PolygonAnnotation};

const BIN: &str = env!("CARGO_BIN_EXE_sticker-forge");
const STUB: &str = env!("CARGO_BIN_EXE_stub-classifier");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("STICKER_FORGE_WORKERS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Three annotated synthetic signs (stop, yield, merge) under `dir/test`.
fn synthetic_signs(dir: &Path) -> PathBuf {
    let o = run(&[
        "gen-synthetic", "--out", p(dir), "--seed", "3", "--count", "2", "--test-count", "1",
        "--classes", "stop,yield,merge",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("test")
}

fn stub_backend(extra: &str) -> String {
    format!("external:{STUB} --labels Stop,Yield,Merge,Ped.Crossing --probs 0.1,0.1,0.1,0.7 {extra}")
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn attack_without_backend_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let signs = synthetic_signs(dir.path());
    let o = run(&["attack", "--signs", p(&signs), "--out", p(&dir.path().join("run"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("backend"));
}

#[test]
fn attack_writes_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let signs = synthetic_signs(dir.path());
    let cfg = dir.path().join("attack.json");
    std::fs::write(&cfg, r#"{"patterns": ["black", "white-black"], "sizes": [10, 20], "stride_pct": 10}"#).unwrap();
    let out = dir.path().join("run");
    let backend = stub_backend("");
    let o = run(&[
        "attack", "--config", p(&cfg), "--backend", &backend, "--signs", p(&signs), "--out", p(&out), "--workers", "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["timings"]["workers"], 2);
    assert_eq!(summary["config"]["stride_pct"], 10);
    assert!(summary["config"].get("workers").is_none());
    let best = &summary["patterns"][0]["best"];
    assert!((best["objective"].as_f64().unwrap() - 70.0).abs() < 1e-9);
    for f in ["tables/sweep_black.csv", "tables/sweep_white-black.md", "tables/best_labels.md", "images/merge_0001_black.png"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    // report re-renders tables from the summary alone
    let again = dir.path().join("again");
    let o = run(&["report", "--summary", p(&out), "--out", p(&again)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(out.join("tables/best_confidence.csv")).unwrap(),
        std::fs::read_to_string(again.join("tables/best_confidence.csv")).unwrap()
    );
    assert!(!again.join("images").exists());
}

#[test]
fn workers_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let signs = synthetic_signs(dir.path());
    let out = dir.path().join("run");
    let backend = stub_backend("");
    let o = Command::new(BIN)
        .args(["attack", "--backend", &backend, "--signs", p(&signs), "--out", p(&out), "--stride", "25"])
        .env("STICKER_FORGE_WORKERS", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["timings"]["workers"], 3);
}

/// Two triangles splitting the same bounding box along its diagonal: after
/// canonicalization their masks share no pixel.
fn disjoint_signs(dir: &Path) -> PathBuf {
    let signs = dir.join("signs");
    std::fs::create_dir_all(&signs).unwrap();
    let img = PixelImage::filled(100, 100, [200, 30, 30]).unwrap();
    let polys = [
        vec![[0.1, 0.1], [0.9, 0.1], [0.1, 0.9]],
        vec![[0.9, 0.9], [0.1, 0.9], [0.9, 0.1]],
    ];
    for (i, poly) in polys.into_iter().enumerate() {
        save_png(&img, &signs.join(format!("s{i}.png"))).unwrap();
        write_annotation(&PolygonAnnotation::new("Stop", poly).unwrap(), &signs.join(format!("s{i}.mask.json"))).unwrap();
    }
    signs
}

#[test]
fn empty_merged_mask_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let signs = disjoint_signs(dir.path());
    let backend = stub_backend("");
    let o = run(&["attack", "--backend", &backend, "--signs", p(&signs), "--out", p(&dir.path().join("run"))]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("no feasible region"), "{}", stderr(&o));

    let o = run(&["mask-merge", p(&signs)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no feasible region"));
}

#[test]
fn missing_sidecar_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let signs = synthetic_signs(dir.path());
    let victim = std::fs::read_dir(&signs)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().ends_with(".mask.json"))
        .unwrap();
    std::fs::remove_file(&victim).unwrap();
    let backend = stub_backend("");
    let o = run(&["attack", "--backend", &backend, "--signs", p(&signs), "--out", p(&dir.path().join("run"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sidecar"), "{}", stderr(&o));
}

#[test]
fn backend_protocol_failure_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let signs = synthetic_signs(dir.path());
    let backend = stub_backend("--mode bad-id");
    let o = run(&["attack", "--backend", &backend, "--signs", p(&signs), "--out", p(&dir.path().join("run"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("protocol"), "{}", stderr(&o));
}

#[test]
fn mask_merge_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let signs = synthetic_signs(dir.path());
    let png = dir.path().join("merged.png");
    let o = run(&["mask-merge", p(&signs), "--out", p(&png)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("merged 3 masks"));
    assert!(png.is_file());

    let img = signs.join("stop_0001.png");
    let backend = stub_backend("");
    let o = run(&["predict", "--backend", &backend, p(&img)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Ped.Crossing\t70.00"));
}

#[test]
fn train_and_serve_builtin_weights() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "gen-synthetic", "--out", p(dir.path()), "--seed", "5", "--count", "6", "--test-count", "2",
        "--classes", "stop,merge",
    ]);
    assert!(o.status.success());
    let weights = dir.path().join("w.sfw");
    let o = run(&[
        "train", "--data", p(&dir.path().join("train")), "--test", p(&dir.path().join("test")), "--out", p(&weights),
        "--epochs", "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("test accuracy"));

    let img = dir.path().join("test/stop_0004.png");
    let direct = run(&["predict", "--backend", &format!("builtin:{}", p(&weights)), p(&img)]);
    let served = run(&[
        "predict", "--backend", &format!("external:{STUB} --weights {}", p(&weights)), p(&img),
    ]);
    assert_eq!(direct.status.code(), Some(0), "{}", stderr(&direct));
    assert_eq!(direct.stdout, served.stdout);

    let o = run(&["predict", "--backend", "builtin:/nonexistent.sfw", p(&img)]);
    assert_eq!(o.status.code(), Some(1));
}
