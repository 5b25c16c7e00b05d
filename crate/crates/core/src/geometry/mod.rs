//! Differential quantities on triangle meshes: areas, normals, dihedral
//! angles, and the cotangent Laplacian / lumped mass pair.

mod adjacency;
mod laplacian;
mod measures;

pub use adjacency::{validate, EdgeAdjacency, ValidationReport};
pub use laplacian::{cotangent_laplacian, mass_matrix, SparseSymMatrix, EPS_ANGLE, EPS_MASS_REL};
pub use measures::{
    edge_dihedral_angles, face_geometry, vertex_dihedral_features, vertex_normals, EdgeAngles,
    FaceGeometry, VertexNormals, EPS_AREA,
};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("every face of the mesh is degenerate")]
    DegenerateMesh,
}

#[inline]
pub(crate) fn sub<T: Scalar>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross<T: Scalar>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm<T: Scalar>(a: [T; 3]) -> T {
    dot(a, a).sqrt()
}
