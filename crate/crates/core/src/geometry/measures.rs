use super::{cross, dot, norm, sub, EdgeAdjacency};
use crate::mesh::Mesh;
use crate::scalar::Scalar;

/// Area assigned to faces whose computed area is at or below this value.
pub const EPS_AREA: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FaceGeometry<T: Scalar> {
    pub areas: Vec<T>,
    pub normals: Vec<[T; 3]>,
    /// Faces whose area fell to `EPS_AREA`; they carry the fallback normal.
    pub degenerate: Vec<usize>,
}

fn fallback_normal<T: Scalar>() -> [T; 3] {
    [T::zero(), T::zero(), T::one()]
}

pub fn face_geometry<T: Scalar>(mesh: &Mesh<T>) -> FaceGeometry<T> {
    let eps = T::of(EPS_AREA);
    let half = T::of(0.5);
    let mut areas = Vec::with_capacity(mesh.face_count());
    let mut normals = Vec::with_capacity(mesh.face_count());
    let mut degenerate = Vec::new();
    for (f, &[a, b, c]) in mesh.faces.iter().enumerate() {
        let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        let n = cross(sub(pb, pa), sub(pc, pa));
        let len = norm(n);
        let area = half * len;
        if area > eps {
            areas.push(area);
            normals.push(n.map(|x| x / len));
        } else {
            areas.push(eps);
            normals.push(fallback_normal());
            degenerate.push(f);
        }
    }
    FaceGeometry {
        areas,
        normals,
        degenerate,
    }
}

#[derive(Debug, Clone)]
pub struct VertexNormals<T: Scalar> {
    pub normals: Vec<[T; 3]>,
    /// Vertices without a usable weighted normal (isolated, or incident
    /// normals cancelling); they get `(0, 0, 1)`.
    pub fallback: Vec<usize>,
}

/// Area-weighted average of incident face normals.
pub fn vertex_normals<T: Scalar>(mesh: &Mesh<T>, faces: &FaceGeometry<T>) -> VertexNormals<T> {
    let mut acc = vec![[T::zero(); 3]; mesh.vertex_count()];
    for (f, tri) in mesh.faces.iter().enumerate() {
        let w = faces.areas[f];
        let n = faces.normals[f];
        for &v in tri {
            for k in 0..3 {
                acc[v][k] = acc[v][k] + w * n[k];
            }
        }
    }
    let tiny = T::of(1e-300).max(T::min_positive_value());
    let mut fallback = Vec::new();
    let normals = acc
        .into_iter()
        .enumerate()
        .map(|(v, n)| {
            let len = norm(n);
            if len > tiny {
                n.map(|x| x / len)
            } else {
                fallback.push(v);
                fallback_normal()
            }
        })
        .collect();
    VertexNormals { normals, fallback }
}

/// Per-edge dihedral angles, indexed like `EdgeAdjacency::edges`.
#[derive(Debug, Clone)]
pub struct EdgeAngles<T: Scalar> {
    pub angles: Vec<T>,
    /// Boundary edges: angle 0 and excluded from vertex statistics.
    pub boundary: Vec<bool>,
}

fn normal_angle<T: Scalar>(n1: [T; 3], n2: [T; 3]) -> T {
    dot(n1, n2).max(-T::one()).min(T::one()).acos()
}

/// Angle between the normals of adjacent faces in `[0, pi]`; 0 when
/// coplanar. Edges with more than two faces take the mean over all pairs.
pub fn edge_dihedral_angles<T: Scalar>(
    adj: &EdgeAdjacency,
    faces: &FaceGeometry<T>,
) -> EdgeAngles<T> {
    let mut angles = Vec::with_capacity(adj.len());
    let mut boundary = Vec::with_capacity(adj.len());
    for inc in &adj.faces {
        if inc.len() < 2 {
            angles.push(T::zero());
            boundary.push(true);
            continue;
        }
        let mut sum = T::zero();
        let mut pairs = 0usize;
        for i in 0..inc.len() {
            for j in i + 1..inc.len() {
                sum = sum + normal_angle(faces.normals[inc[i]], faces.normals[inc[j]]);
                pairs += 1;
            }
        }
        angles.push(sum / T::of_usize(pairs));
        boundary.push(false);
    }
    EdgeAngles { angles, boundary }
}

/// `(mean, min, max, population std)` of the interior-edge dihedral angles
/// around each vertex; zeros when a vertex touches no interior edge.
pub fn vertex_dihedral_features<T: Scalar>(
    n_vertices: usize,
    adj: &EdgeAdjacency,
    edge_angles: &EdgeAngles<T>,
) -> Vec<[T; 4]> {
    let mut incident: Vec<Vec<T>> = vec![Vec::new(); n_vertices];
    for (e, [a, b]) in adj.edges.iter().enumerate() {
        if edge_angles.boundary[e] {
            continue;
        }
        let ang = edge_angles.angles[e];
        incident[*a].push(ang);
        incident[*b].push(ang);
    }
    incident
        .into_iter()
        .map(|vals| {
            if vals.is_empty() {
                return [T::zero(); 4];
            }
            let n = T::of_usize(vals.len());
            let mean = vals.iter().copied().sum::<T>() / n;
            let min = vals.iter().copied().fold(T::infinity(), T::min);
            let max = vals.iter().copied().fold(T::neg_infinity(), T::max);
            let var = vals.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
            // Rounding can push the mean a hair outside [min, max].
            [mean.max(min).min(max), min, max, var.sqrt()]
        })
        .collect()
}
