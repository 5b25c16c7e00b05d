use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use meshmlp::mesh::{primitives, write_labels, write_obj, ManifestEntry};
use meshmlp::pipeline::synthetic::{hemisphere_labels, write_hemisphere_segmentation, write_sphere_cube_classification, SyntheticSpec};
use meshmlp::{DatasetManifest, Split, Task};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshmlp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn listing(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn small_segmentation(dir: &Path) -> PathBuf {
    let spec = SyntheticSpec {
        train: 2,
        test: 1,
        sphere_subdivisions: 1,
        ..SyntheticSpec::default()
    };
    write_hemisphere_segmentation(dir, spec).unwrap()
}

#[test]
fn unknown_flag_exits_1_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_segmentation(&dir.path().join("data"));
    let out = dir.path().join("out");
    fs::create_dir(&out).unwrap();
    let ckpt = out.join("m.ckpt");
    let o = run(&["train", "--manifest", s(&manifest), "--checkpoint", s(&ckpt), "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--bogus"));
    assert!(o.stdout.is_empty());
    assert!(listing(&out).is_empty());
}

#[test]
fn invalid_values_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_segmentation(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    for (flag, value) in [("--norm", "xx"), ("--features", "xyz,colour"), ("--accum", "0"), ("--subset-divisor", "0")] {
        let o = run(&["train", "--manifest", s(&manifest), "--checkpoint", s(&ckpt), flag, value]);
        assert_eq!(o.status.code(), Some(1), "{flag}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(flag), "{flag}");
    }
    let o = run(&["train", "--manifest", s(&dir.path().join("missing.json")), "--checkpoint", s(&ckpt)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--manifest"));
    assert!(!ckpt.exists());
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["train", "--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
}

#[test]
fn info_reports_components_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("two.obj");
    write_obj(&primitives::two_disjoint_tetrahedra(), &mesh).unwrap();
    let v = stdout_json(&run(&["info", "--mesh", s(&mesh)]));
    assert_eq!(v["components"], 2);
    assert_eq!(v["is_manifold"], true);

    let manifest = small_segmentation(dir.path());
    let v = stdout_json(&run(&["info", "--manifest", s(&manifest)]));
    assert_eq!((v["train"].as_u64(), v["test"].as_u64()), (Some(2), Some(1)));
    assert_eq!(v["faces"]["max"], 80);
    assert_eq!(v["multi_component_meshes"], 0);
}

#[test]
fn preprocess_reuses_cache_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_segmentation(dir.path());
    let cache = dir.path().join("cache");
    let first = stdout_json(&run(&["preprocess", "--manifest", s(&manifest), "--cache", s(&cache)]));
    assert_eq!((first["computed"].as_u64(), first["reused"].as_u64()), (Some(3), Some(0)));
    let second = stdout_json(&run(&["preprocess", "--manifest", s(&manifest), "--cache", s(&cache)]));
    assert_eq!((second["computed"].as_u64(), second["reused"].as_u64()), (Some(0), Some(3)));
}

#[test]
fn train_is_reproducible_and_feeds_eval_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_segmentation(&dir.path().join("data"));
    let cache = dir.path().join("cache");
    stdout_json(&run(&["preprocess", "--manifest", s(&manifest), "--cache", s(&cache)]));
    let cache_before: Vec<Vec<u8>> = listing(&cache).iter().map(|p| fs::read(p).unwrap()).collect();

    let train = |name: &str| {
        let ckpt = dir.path().join(name);
        let v = stdout_json(&run(&[
            "train", "--manifest", s(&manifest), "--checkpoint", s(&ckpt), "--cache", s(&cache),
            "--epochs", "3", "--accum", "2", "--seed", "7", "--width-divisor", "8", "--eval-every", "1",
        ]));
        assert_eq!(v["train_size"], 2);
        let log = fs::read_to_string(dir.path().join(format!("{name}.log.jsonl"))).unwrap();
        (fs::read(&ckpt).unwrap(), log, ckpt)
    };
    let (a, log_a, ckpt) = train("a.ckpt");
    let (b, log_b, _) = train("b.ckpt");
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);
    assert_eq!(log_a.lines().count(), 3);
    let rec: Value = serde_json::from_str(log_a.lines().next().unwrap()).unwrap();
    assert_eq!(rec["optimizer_steps"], 1);
    assert!(rec.get("timestamp").is_none());
    let after: Vec<Vec<u8>> = listing(&cache).iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(cache_before, after);

    let m = stdout_json(&run(&["eval", "--manifest", s(&manifest), "--checkpoint", s(&ckpt)]));
    assert_eq!(m["total"], 80);
    let acc = m["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let out = dir.path().join("labeled");
    fs::create_dir(&out).unwrap();
    let p = stdout_json(&run(&["predict", "--checkpoint", s(&ckpt), "--manifest", s(&manifest), "--out", s(&out)]));
    let preds = p["predictions"].as_array().unwrap();
    assert_eq!(preds.len(), 1);
    assert_eq!(preds[0]["prediction"].as_array().unwrap().len(), 80);
    assert!(out.join("hemi_test_000.obj").exists());
    assert!(out.join("hemi_test_000.mtl").exists());
}

#[test]
fn eval_of_an_overfit_checkpoint_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        train: 1,
        test: 1,
        sphere_subdivisions: 1,
        cube_grid: 3,
        ..SyntheticSpec::default()
    };
    let manifest = write_sphere_cube_classification(dir.path(), spec).unwrap();
    let config = dir.path().join("train.json");
    fs::write(&config, r#"{"augment": false, "accumulation": 1, "eval_every": 1, "stop_at_train_accuracy": 1.0}"#).unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let v = stdout_json(&run(&[
        "train", "--manifest", s(&manifest), "--checkpoint", s(&ckpt), "--config", s(&config),
        "--epochs", "100", "--width-divisor", "8", "--seed", "3",
    ]));
    assert_eq!(v["final"]["train_accuracy"], 1.0);
    let m = stdout_json(&run(&["eval", "--manifest", s(&manifest), "--checkpoint", s(&ckpt), "--split", "train"]));
    assert_eq!(m["accuracy"], 1.0);

    let p = stdout_json(&run(&["predict", "--checkpoint", s(&ckpt), "--mesh", s(&dir.path().join("sphere_train_000.obj"))]));
    assert_eq!(p["predictions"][0]["prediction"], 0);
}

#[test]
fn subset_divisor_100_of_381_keeps_4() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = primitives::icosphere(1);
    write_obj(&mesh, &dir.path().join("s.obj")).unwrap();
    write_labels(&hemisphere_labels(&mesh), &dir.path().join("s.labels")).unwrap();
    let entry = |split| ManifestEntry {
        mesh: "s.obj".into(),
        labels: Some("s.labels".into()),
        class: None,
        split,
    };
    let mut entries: Vec<ManifestEntry> = (0..381).map(|_| entry(Split::Train)).collect();
    entries.push(entry(Split::Test));
    let manifest = dir.path().join("manifest.json");
    DatasetManifest {
        task: Task::Segmentation,
        num_classes: 2,
        entries,
    }
    .save(&manifest)
    .unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let v = stdout_json(&run(&[
        "train", "--manifest", s(&manifest), "--checkpoint", s(&ckpt), "--subset-divisor", "100",
        "--epochs", "1", "--width-divisor", "8", "--features", "xyz,normal",
    ]));
    assert_eq!(v["train_size"], 4);
    let log = fs::read_to_string(dir.path().join("m.ckpt.log.jsonl")).unwrap();
    let rec: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(rec["train_size"], 4);
}

#[test]
fn wrong_task_checkpoint_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let seg = small_segmentation(&dir.path().join("seg"));
    let cls = write_sphere_cube_classification(
        &dir.path().join("cls"),
        SyntheticSpec {
            train: 1,
            test: 1,
            sphere_subdivisions: 1,
            cube_grid: 2,
            ..SyntheticSpec::default()
        },
    )
    .unwrap();
    let ckpt = dir.path().join("m.ckpt");
    stdout_json(&run(&[
        "train", "--manifest", s(&seg), "--checkpoint", s(&ckpt), "--epochs", "1", "--width-divisor", "8",
    ]));
    let o = run(&["eval", "--manifest", s(&cls), "--checkpoint", s(&ckpt)]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["eval", "--manifest", s(&seg), "--checkpoint", s(&dir.path().join("nope.ckpt"))]);
    assert_eq!(o.status.code(), Some(1));
}
