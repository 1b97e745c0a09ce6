use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL_CONFIG: &str = r#"
[data]
classes = 2
per_class = 12
shift = "color:0.5"

[train]
batch_size = 8
epochs_goal = 1
epochs_sticker = 1
epochs_adapt = 1
oos_grid = 2

[suitability]
seed = 3
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stickerda"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Temp run directory seeded with the small config snapshot.
fn small_run() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("config.toml"), SMALL_CONFIG).unwrap();
    dir
}

#[test]
fn missing_dependency_names_the_producing_command() {
    let dir = small_run();
    let out = run(dir.path(), &["adapt"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing dependency"), "{err}");
    assert!(err.contains("pretrain-sticker"), "{err}");

    ok(dir.path(), &["make-data"]);
    let out = run(dir.path(), &["pretrain-sticker"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("pretrain-goal"));
}

#[test]
fn full_pipeline_writes_checkpoints_reports_and_plots() {
    let dir = small_run();
    let root = dir.path();
    for cmd in ["make-data", "prepare-stickers", "make-oos", "pretrain-goal", "pretrain-sticker", "adapt"] {
        ok(root, &[cmd]);
    }
    for ckpt in ["source_goal", "source_sticker", "adapted"] {
        assert!(root.join("checkpoints").join(format!("{ckpt}.ckpt")).exists(), "{ckpt}");
    }
    for set in ["source", "target", "stickered_source", "stickered_target", "oos"] {
        assert!(root.join("data").join(set).is_dir(), "{set}");
    }
    assert!(root.join("reports/adaptation_a_distance.json").exists());
    assert!(root.join("plots/convergence.svg").exists());
    assert!(fs::read_to_string(root.join("metrics.jsonl")).unwrap().lines().count() > 0);

    let stdout = ok(root, &["eval"]);
    assert!(stdout.contains("checkpoint adapted"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("reports/eval_adapted.json")).unwrap()).unwrap();
    let acc = report["target_acc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn suitability_merges_reports_across_calls() {
    let dir = small_run();
    let root = dir.path();
    ok(root, &["make-data"]);
    ok(root, &["suitability", "--task", "sticker-clsf"]);
    ok(root, &["suitability", "--task", "image-rotation"]);
    let reports: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(root.join("reports/suitability.json")).unwrap()).unwrap();
    assert_eq!(reports.len(), 2);
    for r in &reports {
        let (dsm, tsm) = (r["dsm"].as_f64().unwrap(), r["tsm"].as_f64().unwrap());
        assert_eq!(r["passes"].as_bool().unwrap(), dsm + tsm > r["zeta"].as_f64().unwrap());
    }
    let svg = fs::read_to_string(root.join("plots/suitability.svg")).unwrap();
    assert!(svg.contains("sticker-clsf") && svg.contains("image-rotation"));
}

#[test]
fn flags_persist_in_the_config_snapshot() {
    let dir = small_run();
    let root = dir.path();
    ok(root, &["--seed", "5", "--no-oos", "make-data"]);
    ok(root, &["make-data"]);
    let text = fs::read_to_string(root.join("config.toml")).unwrap();
    let snap: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(snap["train"]["seed"].as_integer(), Some(5));
    assert_eq!(snap["train"]["ablation"]["no_oos"].as_bool(), Some(true));
    assert_eq!(snap["data"]["per_class"].as_integer(), Some(12));
}

#[test]
fn training_rejects_whole_image_tasks() {
    let dir = small_run();
    let out = run(dir.path(), &["--task", "jigsaw", "pretrain-goal"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not a sticker task"));
}

#[test]
fn bad_config_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[train]\nnot_a_field = 1\n").unwrap();
    let out = run(&dir.path().join("run"), &["--config", cfg.to_str().unwrap(), "make-data"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("parsing config"));
}
