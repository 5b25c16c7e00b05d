//! JSON dataset manifests and training-set subsetting.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MeshError, MeshResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Segmentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub mesh: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<u32>,
    pub split: Split,
}

/// A list of meshes with their labels and train/test assignment.
///
/// Relative paths are resolved against the manifest's directory on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub task: Task,
    pub num_classes: u32,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> MeshResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| MeshError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| MeshError::InvalidManifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for e in &mut manifest.entries {
            if e.mesh.is_relative() {
                e.mesh = base.join(&e.mesh);
            }
            if let Some(l) = &mut e.labels {
                if l.is_relative() {
                    *l = base.join(&*l);
                }
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> MeshResult<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| MeshError::InvalidManifest(e.to_string()))?;
        fs::write(path, text).map_err(|source| MeshError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Checks per-entry label requirements for the manifest's task.
    pub fn validate(&self) -> MeshResult<()> {
        if self.num_classes == 0 {
            return Err(MeshError::InvalidManifest("num_classes must be positive".into()));
        }
        for (i, e) in self.entries.iter().enumerate() {
            match self.task {
                Task::Classification => match e.class {
                    Some(c) if c < self.num_classes => {}
                    Some(c) => {
                        return Err(MeshError::InvalidManifest(format!(
                            "entry {i}: class {c} >= num_classes {}",
                            self.num_classes
                        )))
                    }
                    None => {
                        return Err(MeshError::InvalidManifest(format!(
                            "entry {i}: classification entry without class"
                        )))
                    }
                },
                Task::Segmentation => {
                    if e.labels.is_none() {
                        return Err(MeshError::InvalidManifest(format!(
                            "entry {i}: segmentation entry without labels"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Fails unless both splits are populated.
    pub fn require_train_and_test(&self) -> MeshResult<()> {
        for split in [Split::Train, Split::Test] {
            if !self.entries.iter().any(|e| e.split == split) {
                return Err(MeshError::InvalidManifest(format!("no {split:?} entries")));
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }
}

/// Keeps `ceil(N / divisor)` randomly chosen training entries.
///
/// Classification manifests are subsampled per class (`ceil(N_c / divisor)`
/// each); segmentation manifests globally. Test entries and the relative
/// order of surviving entries are unchanged.
pub fn subset_training_set(manifest: &DatasetManifest, divisor: usize, seed: u64) -> DatasetManifest {
    let divisor = divisor.max(1);
    if divisor == 1 {
        return manifest.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train: Vec<usize> = manifest
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.split == Split::Train)
        .map(|(i, _)| i)
        .collect();

    let pools: Vec<Vec<usize>> = match manifest.task {
        Task::Segmentation => vec![train],
        Task::Classification => {
            let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for i in train {
                by_class
                    .entry(manifest.entries[i].class.unwrap_or(0))
                    .or_default()
                    .push(i);
            }
            by_class.into_values().collect()
        }
    };

    let mut keep = vec![false; manifest.entries.len()];
    for pool in pools {
        let want = pool.len().div_ceil(divisor);
        for j in sample(&mut rng, pool.len(), want) {
            keep[pool[j]] = true;
        }
    }
    DatasetManifest {
        task: manifest.task,
        num_classes: manifest.num_classes,
        entries: manifest
            .entries
            .iter()
            .enumerate()
            .filter(|(i, e)| e.split == Split::Test || keep[*i])
            .map(|(_, e)| e.clone())
            .collect(),
    }
}
