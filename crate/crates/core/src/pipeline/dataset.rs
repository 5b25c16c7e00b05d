use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{assemble_features, derive_vertex_targets, FeatureToggles, PipelineError};
use crate::autodiff::Tensor;
use crate::mesh::{attach_face_labels, parse_mesh, DatasetManifest, ManifestEntry, Mesh, MeshError, MeshFormat, Split, Task};
use crate::spectral::cache::{content_hash, CachedFeatures};

/// Environment variable bounding preprocessing worker threads.
pub const THREADS_ENV: &str = "MESHMLP_THREADS";

/// One mesh ready for the network.
#[derive(Debug, Clone)]
pub struct Sample {
    pub mesh_id: String,
    pub features: Tensor<f32>,
    pub faces: Vec<[usize; 3]>,
    pub class: Option<u32>,
    pub face_labels: Option<Vec<u32>>,
    pub vertex_targets: Option<Vec<usize>>,
}

impl Sample {
    /// Builds a sample from an in-memory mesh. Segmentation needs face
    /// labels on the mesh; classification needs `class`.
    pub fn from_mesh(
        mesh_id: impl Into<String>,
        mesh: &Mesh<f64>,
        task: Task,
        class: Option<u32>,
        toggles: FeatureToggles,
    ) -> Result<Self, PipelineError> {
        let features = assemble_features(mesh, toggles)?;
        Self::with_features(mesh_id.into(), mesh, task, class, features)
    }

    /// A sample for prediction only: features and faces, no targets.
    pub fn unlabeled(mesh_id: impl Into<String>, mesh: &Mesh<f64>, toggles: FeatureToggles) -> Result<Self, PipelineError> {
        Ok(Sample {
            mesh_id: mesh_id.into(),
            features: assemble_features(mesh, toggles)?,
            faces: mesh.faces.clone(),
            class: None,
            face_labels: None,
            vertex_targets: None,
        })
    }

    fn with_features(
        mesh_id: String,
        mesh: &Mesh<f64>,
        task: Task,
        class: Option<u32>,
        features: Tensor<f32>,
    ) -> Result<Self, PipelineError> {
        if features.rows() != mesh.vertex_count() {
            return Err(PipelineError::InvalidConfig(format!(
                "{mesh_id}: {} feature rows for {} vertices",
                features.rows(),
                mesh.vertex_count()
            )));
        }
        let (class, vertex_targets) = match task {
            Task::Classification => (Some(class.ok_or(PipelineError::MissingLabels)?), None),
            Task::Segmentation => {
                let t = derive_vertex_targets(mesh)?;
                if !t.isolated.is_empty() {
                    log::warn!("{mesh_id}: {} isolated vertices assigned class 0", t.isolated.len());
                }
                (class, Some(t.labels))
            }
        };
        Ok(Sample {
            mesh_id,
            features,
            faces: mesh.faces.clone(),
            class,
            face_labels: mesh.face_labels.clone(),
            vertex_targets,
        })
    }

    /// Loss targets: the class id, or one id per vertex.
    pub fn loss_targets(&self) -> Vec<usize> {
        match (&self.vertex_targets, self.class) {
            (Some(v), _) => v.clone(),
            (None, Some(c)) => vec![c as usize],
            (None, None) => Vec::new(),
        }
    }
}

fn read_entry_mesh(entry: &ManifestEntry, task: Task) -> Result<Mesh<f64>, PipelineError> {
    let mesh = parse_mesh(&entry.mesh, MeshFormat::Auto)?;
    match (&entry.labels, task) {
        (Some(l), _) => Ok(attach_face_labels(mesh, l)?),
        (None, Task::Segmentation) => Err(PipelineError::MissingLabels),
        (None, Task::Classification) => Ok(mesh),
    }
}

/// Hash of the mesh file bytes and the feature selection.
fn source_hash(mesh_bytes: &[u8], toggles: FeatureToggles) -> u64 {
    let mut buf = mesh_bytes.to_vec();
    buf.push(0);
    buf.extend_from_slice(toggles.to_string().as_bytes());
    content_hash(&buf)
}

/// Cache file for one mesh and feature selection.
pub fn cache_path(cache_dir: &Path, mesh: &Path, toggles: FeatureToggles) -> PathBuf {
    let stem = mesh.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let key = content_hash(mesh.to_string_lossy().as_bytes());
    cache_dir.join(format!("{stem}-{key:016x}-{}.feat", toggles.to_string().replace(',', "+")))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, PipelineError> {
    fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Cached features if present and built from the current file contents.
fn cached(cache_dir: &Path, entry: &ManifestEntry, toggles: FeatureToggles, hash: u64) -> Option<Tensor<f32>> {
    let c = CachedFeatures::read(&cache_path(cache_dir, &entry.mesh, toggles)).ok()?;
    if c.source_hash != hash || c.cols != toggles.channels() {
        return None;
    }
    Tensor::from_vec(c.rows, c.cols, c.data).ok()
}

fn load_entry(
    entry: &ManifestEntry,
    task: Task,
    toggles: FeatureToggles,
    cache_dir: Option<&Path>,
) -> Result<Sample, PipelineError> {
    let mesh = read_entry_mesh(entry, task)?;
    let hash = source_hash(&read_bytes(&entry.mesh)?, toggles);
    let features = match cache_dir.and_then(|d| cached(d, entry, toggles, hash)) {
        Some(f) => f,
        None => assemble_features(&mesh, toggles)?,
    };
    Sample::with_features(entry.mesh.display().to_string(), &mesh, task, entry.class, features)
}

/// Thread count from `MESHMLP_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, PipelineError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.or_else(threads_from_env) {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| PipelineError::InvalidConfig(e.to_string()))
}

/// Loads every entry of `split` in manifest order, reading cached
/// features when valid and computing them otherwise (the cache is not
/// written here).
pub fn load_split(
    manifest: &DatasetManifest,
    split: Split,
    toggles: FeatureToggles,
    cache_dir: Option<&Path>,
) -> Result<Vec<Sample>, PipelineError> {
    let entries: Vec<&ManifestEntry> = manifest.split(split).collect();
    pool(None)?.install(|| {
        entries
            .par_iter()
            .map(|e| load_entry(e, manifest.task, toggles, cache_dir))
            .collect()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FailedMesh {
    pub mesh: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PrecomputeReport {
    pub computed: usize,
    pub reused: usize,
    pub failed: Vec<FailedMesh>,
}

impl PrecomputeReport {
    pub fn total(&self) -> usize {
        self.computed + self.reused + self.failed.len()
    }
}

enum Outcome {
    Computed,
    Reused,
}

fn precompute_one(entry: &ManifestEntry, toggles: FeatureToggles, cache_dir: &Path) -> Result<Outcome, PipelineError> {
    let bytes = read_bytes(&entry.mesh)?;
    let hash = source_hash(&bytes, toggles);
    if cached(cache_dir, entry, toggles, hash).is_some() {
        return Ok(Outcome::Reused);
    }
    let mesh = parse_mesh(&entry.mesh, MeshFormat::Auto)?;
    let features = assemble_features(&mesh, toggles)?;
    let c = CachedFeatures {
        rows: features.rows(),
        cols: features.cols(),
        data: features.into_vec(),
        source_hash: hash,
    };
    let path = cache_path(cache_dir, &entry.mesh, toggles);
    c.write(&path).map_err(|source| PipelineError::Io { path, source })?;
    Ok(Outcome::Computed)
}

/// Computes and caches features for every manifest entry, reusing cache
/// files whose hash matches. Per-mesh failures are reported, not fatal.
pub fn precompute_features(
    manifest: &DatasetManifest,
    toggles: FeatureToggles,
    cache_dir: &Path,
    threads: Option<usize>,
) -> Result<PrecomputeReport, PipelineError> {
    fs::create_dir_all(cache_dir).map_err(|source| PipelineError::Io {
        path: cache_dir.to_path_buf(),
        source,
    })?;
    let outcomes: Vec<Result<Outcome, PipelineError>> = pool(threads)?
        .install(|| manifest.entries.par_iter().map(|e| precompute_one(e, toggles, cache_dir)).collect());
    let mut report = PrecomputeReport::default();
    for (entry, o) in manifest.entries.iter().zip(outcomes) {
        match o {
            Ok(Outcome::Computed) => report.computed += 1,
            Ok(Outcome::Reused) => report.reused += 1,
            Err(e) => {
                log::warn!("{}: {e}", entry.mesh.display());
                report.failed.push(FailedMesh {
                    mesh: entry.mesh.clone(),
                    error: e.to_string(),
                })
            }
        }
    }
    Ok(report)
}

impl From<MeshError> for PipelineError {
    fn from(e: MeshError) -> Self {
        PipelineError::Mesh(e)
    }
}
