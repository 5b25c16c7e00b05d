//! Feature assembly, augmentation, training, evaluation and the on-disk
//! feature cache.

mod augment;
mod dataset;
mod features;
mod metrics;
pub mod synthetic;
mod targets;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::TensorError;
use crate::geometry::GeometryError;
use crate::mesh::{DatasetManifest, MeshError, Split};
use crate::model::{ModelError, Network, NetworkConfig};
use crate::spectral::SpectralError;

pub use augment::{augment_rotation, rotate_features, Axis, Rotation};
pub use dataset::{cache_path, load_split, precompute_features, threads_from_env, FailedMesh, PrecomputeReport, Sample, THREADS_ENV};
pub use features::{
    assemble_features, FeatureLayout, FeatureToggles, DIHEDRAL_CHANNELS, HKS_CHANNELS, NORMAL_CHANNELS, XYZ_CHANNELS,
};
pub use metrics::Metrics;
pub use targets::{derive_vertex_targets, VertexTargets};
pub use train::{evaluate, predict_sample, train_samples, EpochRecord, Prediction, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Mesh(MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("mesh has no labels for this task")]
    MissingLabels,
    #[error("non-finite loss at epoch {epoch} on {mesh}")]
    NonFiniteLoss { epoch: usize, mesh: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Network config for a run: the default table (or `base`) with the
/// input width, norm, task and class count taken from the run.
pub fn network_config_for(
    manifest: &DatasetManifest,
    train: &TrainConfig,
    base: Option<NetworkConfig>,
) -> Result<NetworkConfig, PipelineError> {
    let mut c = base.unwrap_or_else(|| NetworkConfig::new(manifest.task, manifest.num_classes as usize));
    c.task = manifest.task;
    c.num_classes = manifest.num_classes as usize;
    c.norm = train.norm;
    c.input_channels = train.features.channels();
    c.validate()?;
    Ok(c)
}

/// Loads both splits and trains a freshly initialized network. The test
/// split may be empty; evaluation records are then train-only.
pub fn train(
    manifest: &DatasetManifest,
    config: &TrainConfig,
    network: Option<NetworkConfig>,
    cache_dir: Option<&Path>,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, PipelineError> {
    config.validate()?;
    let net_config = network_config_for(manifest, config, network)?;
    let train_set = load_split(manifest, Split::Train, config.features, cache_dir)?;
    let test_set = load_split(manifest, Split::Test, config.features, cache_dir)?;
    let net = Network::new(net_config, config.seed)?;
    train_samples(net, &train_set, &test_set, config, on_epoch)
}

/// Network config and feature selection stored next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub network: NetworkConfig,
    pub features: FeatureToggles,
}

pub fn meta_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the binary checkpoint and its JSON sidecar (`<checkpoint>.json`).
pub fn save_model(net: &Network<f32>, features: FeatureToggles, checkpoint: &Path) -> Result<(), PipelineError> {
    let meta = ModelMeta {
        network: net.config().clone(),
        features,
    };
    net.save_checkpoint(checkpoint)?;
    let json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    let side = meta_path(checkpoint);
    fs::write(&side, json + "\n").map_err(io_err(&side))
}

pub fn load_model(checkpoint: &Path) -> Result<(Network<f32>, FeatureToggles), PipelineError> {
    let side = meta_path(checkpoint);
    let text = fs::read_to_string(&side).map_err(io_err(&side))?;
    let meta: ModelMeta =
        serde_json::from_str(&text).map_err(|e| PipelineError::InvalidConfig(format!("{}: {e}", side.display())))?;
    meta.network.validate()?;
    if meta.network.input_channels != meta.features.channels() {
        return Err(PipelineError::InvalidConfig(format!(
            "{}: features give {} channels, network expects {}",
            side.display(),
            meta.features.channels(),
            meta.network.input_channels
        )));
    }
    let mut net = Network::new(meta.network, 0)?;
    net.load_checkpoint(checkpoint)?;
    Ok((net, meta.features))
}

#[cfg(test)]
mod tests;
