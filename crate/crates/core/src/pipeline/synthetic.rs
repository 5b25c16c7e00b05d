//! Synthetic datasets of noisy spheres and cubes, written to disk with a
//! manifest, for tests and demos.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{UnitQuaternion, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PipelineError;
use crate::mesh::{primitives, write_labels, write_obj, DatasetManifest, ManifestEntry, Mesh, Split, Task};

/// Uniformly distributed random rotation.
pub fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    let q = Vector4::from_fn(|_, _| StandardNormal.sample(rng));
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(q))
}

pub fn rotate(mesh: &Mesh<f64>, r: &UnitQuaternion<f64>) -> Mesh<f64> {
    mesh.map_vertices(|p| {
        let q = r * Vector3::from(p);
        [q.x, q.y, q.z]
    })
}

/// Displaces every vertex uniformly within `[-amplitude, amplitude]^3`.
pub fn jitter(mesh: &Mesh<f64>, amplitude: f64, rng: &mut impl Rng) -> Mesh<f64> {
    let offsets: Vec<[f64; 3]> = (0..mesh.vertex_count())
        .map(|_| [0; 3].map(|_| rng.gen_range(-amplitude..=amplitude)))
        .collect();
    let mut out = mesh.clone();
    for (p, o) in out.vertices.iter_mut().zip(offsets) {
        for k in 0..3 {
            p[k] += o[k];
        }
    }
    out
}

/// Randomly rotated, jittered icosphere.
pub fn noisy_icosphere(subdivisions: u32, amplitude: f64, rng: &mut impl Rng) -> Mesh<f64> {
    let r = random_rotation(rng);
    jitter(&rotate(&primitives::icosphere(subdivisions), &r), amplitude, rng)
}

/// Randomly rotated, jittered cube with an `n x n` grid per side.
pub fn noisy_cube(n: usize, amplitude: f64, rng: &mut impl Rng) -> Mesh<f64> {
    let r = random_rotation(rng);
    jitter(&rotate(&primitives::subdivided_cube(n), &r), amplitude, rng)
}

/// Label 1 for faces whose centroid has positive z, else 0.
pub fn hemisphere_labels(mesh: &Mesh<f64>) -> Vec<u32> {
    mesh.faces
        .iter()
        .map(|f| u32::from(f.iter().map(|&v| mesh.vertices[v][2]).sum::<f64>() > 0.0))
        .collect()
}

/// Writes `<name>.obj` and returns the path relative to `dir`.
fn write_mesh(dir: &Path, name: &str, mesh: &Mesh<f64>) -> Result<PathBuf, PipelineError> {
    let file = PathBuf::from(format!("{name}.obj"));
    write_obj(mesh, &dir.join(&file))?;
    Ok(file)
}

fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Sizes and noise of a synthetic set.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub train: usize,
    pub test: usize,
    pub seed: u64,
    pub sphere_subdivisions: u32,
    pub cube_grid: usize,
    pub amplitude: f64,
}

impl Default for SyntheticSpec {
    /// About 300-450 faces per mesh.
    fn default() -> Self {
        SyntheticSpec {
            train: 10,
            test: 5,
            seed: 0,
            sphere_subdivisions: 2,
            cube_grid: 6,
            amplitude: 0.01,
        }
    }
}

/// Spheres (class 0) versus cubes (class 1): `train` and `test` meshes of
/// each class. Writes OBJ files and `manifest.json` (with paths relative
/// to `dir`) into `dir`; returns the manifest path.
pub fn write_sphere_cube_classification(dir: &Path, spec: SyntheticSpec) -> Result<PathBuf, PipelineError> {
    ensure_dir(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut entries = Vec::new();
    for (split, count) in [(Split::Train, spec.train), (Split::Test, spec.test)] {
        for i in 0..count {
            for class in 0..2u32 {
                let mesh = if class == 0 {
                    noisy_icosphere(spec.sphere_subdivisions, spec.amplitude, &mut rng)
                } else {
                    noisy_cube(spec.cube_grid, spec.amplitude, &mut rng)
                };
                let name = format!("{}_{}_{i:03}", if class == 0 { "sphere" } else { "cube" }, split_name(split));
                entries.push(ManifestEntry {
                    mesh: write_mesh(dir, &name, &mesh)?,
                    labels: None,
                    class: Some(class),
                    split,
                });
            }
        }
    }
    save_manifest(dir, Task::Classification, 2, entries)
}

/// Jittered spheres with hemisphere labels (2 classes). The spheres are not
/// rotated so the label boundary is the same plane for every mesh.
pub fn write_hemisphere_segmentation(dir: &Path, spec: SyntheticSpec) -> Result<PathBuf, PipelineError> {
    ensure_dir(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base = primitives::icosphere(spec.sphere_subdivisions);
    let mut entries = Vec::new();
    for (split, count) in [(Split::Train, spec.train), (Split::Test, spec.test)] {
        for i in 0..count {
            let mesh = jitter(&base, spec.amplitude, &mut rng);
            let name = format!("hemi_{}_{i:03}", split_name(split));
            let labels_path = PathBuf::from(format!("{name}.labels"));
            write_labels(&hemisphere_labels(&mesh), &dir.join(&labels_path))?;
            entries.push(ManifestEntry {
                mesh: write_mesh(dir, &name, &mesh)?,
                labels: Some(labels_path),
                class: None,
                split,
            });
        }
    }
    save_manifest(dir, Task::Segmentation, 2, entries)
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Test => "test",
    }
}

fn save_manifest(dir: &Path, task: Task, num_classes: u32, entries: Vec<ManifestEntry>) -> Result<PathBuf, PipelineError> {
    let manifest = DatasetManifest {
        task,
        num_classes,
        entries,
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}
