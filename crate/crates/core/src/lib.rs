//! Mesh classification and segmentation with residual MLPs over per-vertex
//! geometric features (coordinates, normals, dihedral angles and the heat
//! kernel signature).
//!
//! Numeric code is generic over [`scalar::Scalar`]; the aliases below pin
//! the types used in practice (`f32` for training, `f64` for geometry and
//! gradient checks).

pub mod autodiff;
pub mod geometry;
pub mod mesh;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod spectral;

pub use autodiff::NormKind;
pub use mesh::{DatasetManifest, Split, Task};
pub use pipeline::{FeatureToggles, PipelineError, TrainConfig};
pub use scalar::Scalar;

pub type Mesh64 = mesh::Mesh<f64>;
pub type Mesh32 = mesh::Mesh<f32>;
pub type Tensor32 = autodiff::Tensor<f32>;
pub type Tensor64 = autodiff::Tensor<f64>;
pub type Network32 = model::Network<f32>;
pub type Network64 = model::Network<f64>;
