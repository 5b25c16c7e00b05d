use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::synthetic::*;
use super::*;
use crate::mesh::{primitives, DatasetManifest, Split, Task};
use crate::model::{Network, NetworkConfig};

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        accumulation: 1,
        augment: false,
        eval_every: 5,
        lr_decay_epoch: None,
        ..TrainConfig::default()
    }
}

fn small_net(task: Task, k: usize, toggles: FeatureToggles, seed: u64) -> Network<f32> {
    let c = NetworkConfig::scaled_down(task, k, 8).with_input_channels(toggles.channels());
    Network::new(c, seed).unwrap()
}

fn toy_pair() -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = FeatureToggles::ALL;
    vec![
        Sample::from_mesh("sphere", &noisy_icosphere(1, 0.01, &mut rng), Task::Classification, Some(0), t).unwrap(),
        Sample::from_mesh("cube", &noisy_cube(3, 0.01, &mut rng), Task::Classification, Some(1), t).unwrap(),
    ]
}

#[test]
fn two_mesh_toy_set_overfits() {
    let train = toy_pair();
    let mut cfg = quick(50);
    cfg.stop_at_train_accuracy = Some(1.0);
    cfg.eval_every = 1;
    let out = train_samples(small_net(Task::Classification, 2, cfg.features, 3), &train, &[], &cfg, |_| {}).unwrap();
    let last = out.log.last().unwrap();
    assert_eq!(last.train_accuracy, Some(1.0), "{:?}", out.log);
    assert!(last.epoch <= 50);
}

#[test]
fn fixed_seed_reproduces_loss_curve() {
    let train = toy_pair();
    let cfg = TrainConfig {
        augment: true,
        accumulation: 2,
        ..quick(4)
    };
    let run = || {
        let o = train_samples(small_net(Task::Classification, 2, cfg.features, 5), &train, &[], &cfg, |_| {}).unwrap();
        (o.log.iter().map(|r| r.train_loss.to_bits()).collect::<Vec<_>>(), o.network.checkpoint_bytes())
    };
    assert_eq!(run(), run());
}

#[test]
fn accumulation_steps_per_epoch() {
    let pair = toy_pair();
    let train: Vec<Sample> = (0..10).map(|i| pair[i % 2].clone()).collect();
    let cfg = TrainConfig {
        accumulation: 4,
        ..quick(2)
    };
    let mut seen = Vec::new();
    train_samples(small_net(Task::Classification, 2, cfg.features, 1), &train, &[], &cfg, |r| seen.push(r.clone())).unwrap();
    assert!(seen.iter().all(|r| r.optimizer_steps == 3 && r.train_size == 10));
}

#[test]
fn lr_schedule() {
    let c = TrainConfig::default();
    assert_eq!(c.lr_at(149), 1e-3);
    assert!((c.lr_at(150) - 1e-4).abs() < 1e-18);
    assert!(TrainConfig { accumulation: 0, ..c.clone() }.validate().is_err());
}

#[test]
fn rigid_motion_end_to_end() {
    // Rotating the mesh and recomputing equals rotating the cached features
    // for the xyz and normal blocks; the other blocks agree to 1e-6.
    let mesh = noisy_cube(3, 0.02, &mut ChaCha8Rng::seed_from_u64(2));
    let toggles = FeatureToggles::ALL;
    let f = assemble_features(&mesh, toggles).unwrap();
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        let rot = Rotation { axis, quarter_turns: 1 };
        let m = rot.matrix();
        let rotated_mesh = mesh.map_vertices(|p| {
            [0, 1, 2].map(|i| m[i][0] as f64 * p[0] + m[i][1] as f64 * p[1] + m[i][2] as f64 * p[2])
        });
        let g = assemble_features(&rotated_mesh, toggles).unwrap();
        let mut h = f.clone();
        rotate_features(&mut h, toggles, rot);
        for v in 0..f.rows() {
            for c in 0..26 {
                assert!((g.get(v, c) - h.get(v, c)).abs() < 1e-5, "v{v} c{c}");
            }
            for c in 6..26 {
                assert!((g.get(v, c) - f.get(v, c)).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn precompute_reuses_and_detects_changes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        train: 3,
        test: 2,
        sphere_subdivisions: 1,
        cube_grid: 2,
        ..SyntheticSpec::default()
    };
    let manifest_path = write_sphere_cube_classification(dir.path(), spec).unwrap();
    let mut manifest = DatasetManifest::load(&manifest_path).unwrap();
    let bogus = dir.path().join("bogus.off");
    fs::write(&bogus, "OFF\n3 1 0\n0 0 0\n1 0 0\n").unwrap();
    manifest.entries.push(crate::mesh::ManifestEntry {
        mesh: bogus,
        labels: None,
        class: Some(0),
        split: Split::Test,
    });
    let cache = dir.path().join("cache");
    let t = FeatureToggles::ALL;
    let first = precompute_features(&manifest, t, &cache, Some(2)).unwrap();
    assert_eq!((first.computed, first.reused, first.failed.len()), (10, 0, 1), "{:?}", first.failed);
    assert_eq!(first.total(), 11);
    let second = precompute_features(&manifest, t, &cache, None).unwrap();
    assert_eq!((second.computed, second.reused), (0, 10));

    let target = &manifest.entries[0].mesh;
    let text = fs::read_to_string(target).unwrap();
    fs::write(target, text.replacen("v ", "v 0.001", 0) + "# touched\n").unwrap();
    let third = precompute_features(&manifest, t, &cache, None).unwrap();
    assert_eq!((third.computed, third.reused), (1, 9));

    // Cached and freshly computed features agree.
    manifest.entries.pop();
    let from_cache = load_split(&manifest, Split::Train, t, Some(&cache)).unwrap();
    let fresh = load_split(&manifest, Split::Train, t, None).unwrap();
    for (a, b) in from_cache.iter().zip(&fresh) {
        assert_eq!(a.features, b.features);
        assert_eq!(a.class, b.class);
    }
}

#[test]
fn segmentation_samples_and_model_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        train: 2,
        test: 1,
        sphere_subdivisions: 1,
        ..SyntheticSpec::default()
    };
    let manifest = DatasetManifest::load(&write_hemisphere_segmentation(dir.path(), spec).unwrap()).unwrap();
    let t: FeatureToggles = "xyz,normal".parse().unwrap();
    let cfg = TrainConfig {
        features: t,
        ..quick(2)
    };
    let base = NetworkConfig::scaled_down(Task::Segmentation, 2, 8);
    let mut out = super::train(&manifest, &cfg, Some(base), None, |_| {}).unwrap();
    let test = load_split(&manifest, Split::Test, t, None).unwrap();
    assert_eq!(test[0].vertex_targets.as_ref().unwrap().len(), 42);
    let metrics = evaluate(&mut out.network, &test).unwrap();
    assert_eq!(metrics.total, 80);
    for (i, d) in metrics.iou.iter().zip(&metrics.dsc) {
        if let (Some(i), Some(d)) = (i, d) {
            assert!((d - 2.0 * i / (1.0 + i)).abs() < 1e-12);
        }
    }

    let ckpt = dir.path().join("model.ckpt");
    save_model(&out.network, t, &ckpt).unwrap();
    let (mut back, t2) = load_model(&ckpt).unwrap();
    assert_eq!(t2, t);
    assert_eq!(evaluate(&mut back, &test).unwrap(), metrics);
}

#[test]
fn classification_needs_class_ids() {
    let m = primitives::icosphere(1);
    assert!(matches!(
        Sample::from_mesh("x", &m, Task::Classification, None, FeatureToggles::ALL),
        Err(PipelineError::MissingLabels)
    ));
    assert!(matches!(
        Sample::from_mesh("x", &m, Task::Segmentation, None, FeatureToggles::ALL),
        Err(PipelineError::MissingLabels)
    ));
}
