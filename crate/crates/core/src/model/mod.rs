//! Convolution-free per-vertex backbone of residual bottleneck MLP blocks,
//! with classification and segmentation heads.

mod checkpoint;
mod config;
mod network;
mod vote;

use thiserror::Error;

use crate::autodiff::TensorError;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{
    default_wiring, BlockSpec, GroupEntry, GroupSpec, NetworkConfig, DEFAULT_BLOCKS, DEFAULT_HEAD_WIDTHS,
    DEFAULT_INPUT_CHANNELS, DEFAULT_STEM_WIDTH,
};
pub use network::Network;
pub use vote::{argmax, face_label_vote, face_label_vote_probs, softmax_rows};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("network expects {expected} input channels, got {got}")]
    InputChannels { expected: usize, got: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("checkpoint was written for a different network config")]
    ConfigMismatch,
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[cfg(test)]
mod tests;
