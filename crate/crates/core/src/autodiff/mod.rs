//! Dense 2-D tensors with a reverse-mode tape, normalization layers,
//! cross-entropy loss and Adam.

mod gradcheck;
mod norm;
mod optim;
mod params;
mod tape;
mod tensor;

use thiserror::Error;

pub use gradcheck::{finite_difference_check, finite_difference_check_piecewise, GradCheckReport};
pub use norm::{Mode, NormKind, RunningStats, BN_MOMENTUM, DEFAULT_GROUPS, EPS_NORM};
pub use optim::{accumulate_then_step, Adam, EpochSteps, HasParams};
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{channels} channels cannot be split into {groups} groups")]
    InvalidGroupCount { channels: usize, groups: usize },
    #[error("target {target} out of range for {classes} classes")]
    InvalidTarget { target: usize, classes: usize },
}
