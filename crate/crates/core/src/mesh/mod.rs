//! Triangle meshes, their file formats, face labels and dataset manifests.

mod io;
mod labels;
mod manifest;
pub mod primitives;

use std::path::PathBuf;

use thiserror::Error;

use crate::scalar::Scalar;

pub use io::{parse_mesh, parse_obj_str, parse_off_str, write_labeled_mesh, write_obj, MeshFormat};
pub use labels::{attach_face_labels, parse_labels_str, write_labels};
pub use manifest::{subset_training_set, DatasetManifest, ManifestEntry, Split, Task};

/// Errors raised while reading, validating or transforming meshes.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("all vertices coincide; mesh cannot be scaled")]
    DegenerateMesh,
    #[error("label count {labels} does not match face count {faces}")]
    LengthMismatch { labels: usize, faces: usize },
    #[error("line {line}: `{text}` is not a non-negative integer label")]
    NonIntegerLabel { line: usize, text: String },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("face {face}: {msg}")]
    InvalidFace { face: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type MeshResult<T> = Result<T, MeshError>;

/// Indexed triangle mesh with optional per-face class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T: Scalar = f64> {
    pub vertices: Vec<[T; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub face_labels: Option<Vec<u32>>,
}

impl<T: Scalar> Mesh<T> {
    /// Builds a mesh after checking index bounds, distinct corners and finite
    /// coordinates. Non-manifold or open meshes are accepted.
    pub fn new(vertices: Vec<[T; 3]>, faces: Vec<[usize; 3]>) -> MeshResult<Self> {
        let mesh = Mesh {
            vertices,
            faces,
            face_labels: None,
        };
        mesh.check()?;
        Ok(mesh)
    }

    fn check(&self) -> MeshResult<()> {
        if self.faces.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        let n = self.vertices.len();
        for (f, tri) in self.faces.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= n) {
                return Err(MeshError::InvalidFace {
                    face: f,
                    msg: format!("vertex index {bad} out of range (vertex count {n})"),
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::InvalidFace {
                    face: f,
                    msg: format!("repeated vertex index in {tri:?}"),
                });
            }
        }
        if let Some(v) = self
            .vertices
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(MeshError::InvalidFace {
                face: 0,
                msg: format!("vertex {v} has a non-finite coordinate"),
            });
        }
        if let Some(labels) = &self.face_labels {
            if labels.len() != self.faces.len() {
                return Err(MeshError::LengthMismatch {
                    labels: labels.len(),
                    faces: self.faces.len(),
                });
            }
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn with_face_labels(mut self, labels: Vec<u32>) -> MeshResult<Self> {
        if labels.len() != self.faces.len() {
            return Err(MeshError::LengthMismatch {
                labels: labels.len(),
                faces: self.faces.len(),
            });
        }
        self.face_labels = Some(labels);
        Ok(self)
    }

    /// Converts coordinates to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Mesh<U> {
        Mesh {
            vertices: self
                .vertices
                .iter()
                .map(|p| [U::of(p[0].as_f64()), U::of(p[1].as_f64()), U::of(p[2].as_f64())])
                .collect(),
            faces: self.faces.clone(),
            face_labels: self.face_labels.clone(),
        }
    }

    /// Applies `f` to every vertex position.
    pub fn map_vertices(&self, f: impl Fn([T; 3]) -> [T; 3]) -> Self {
        Mesh {
            vertices: self.vertices.iter().map(|&p| f(p)).collect(),
            faces: self.faces.clone(),
            face_labels: self.face_labels.clone(),
        }
    }

    pub fn centroid(&self) -> [T; 3] {
        let n = T::of_usize(self.vertices.len().max(1));
        let mut c = [T::zero(); 3];
        for p in &self.vertices {
            for k in 0..3 {
                c[k] = c[k] + p[k];
            }
        }
        c.map(|x| x / n)
    }
}

/// Centers the vertex centroid at the origin and scales uniformly so the
/// farthest vertex lies at distance 1.
pub fn normalize_unit_scale<T: Scalar>(mesh: &Mesh<T>) -> MeshResult<Mesh<T>> {
    if mesh.faces.is_empty() || mesh.vertices.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    let c = mesh.centroid();
    let radius = mesh
        .vertices
        .iter()
        .map(|p| {
            let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
        })
        .fold(T::zero(), T::max);
    if !(radius > T::min_positive_value()) {
        return Err(MeshError::DegenerateMesh);
    }
    let s = T::one() / radius;
    Ok(mesh.map_vertices(|p| [(p[0] - c[0]) * s, (p[1] - c[1]) * s, (p[2] - c[2]) * s]))
}
