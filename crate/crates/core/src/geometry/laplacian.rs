use std::collections::BTreeMap;

use super::{cross, dot, norm, sub, FaceGeometry, GeometryError};
use crate::mesh::Mesh;
use crate::scalar::Scalar;

/// Cotangents are clamped to `[-cot(EPS_ANGLE), cot(EPS_ANGLE)]`.
pub const EPS_ANGLE: f64 = 1e-4;
/// Mass given to isolated vertices, relative to mean area per vertex.
pub const EPS_MASS_REL: f64 = 1e-12;

/// Symmetric sparse matrix stored as its upper triangle (including the
/// diagonal) in sorted coordinate form without duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix<T: Scalar> {
    pub n: usize,
    pub entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> SparseSymMatrix<T> {
    /// Assembles from unordered triplets; `(i, j)` and `(j, i)` refer to the
    /// same entry and duplicates are summed.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, T)>) -> Self {
        let mut acc: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for (i, j, v) in triplets {
            let key = (i.min(j), i.max(j));
            let slot = acc.entry(key).or_insert_with(T::zero);
            *slot = *slot + v;
        }
        SparseSymMatrix {
            n,
            entries: acc.into_iter().map(|((i, j), v)| (i, j, v)).collect(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.n];
        for &(i, j, v) in &self.entries {
            if i == j {
                d[i] = v;
            }
        }
        d
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries.iter().all(|&(i, j, _)| i == j)
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for &(i, j, v) in &self.entries {
            y[i] = y[i] + v * x[j];
            if i != j {
                y[j] = y[j] + v * x[i];
            }
        }
        y
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<T> {
        let n = self.n;
        let mut d = vec![T::zero(); n * n];
        for &(i, j, v) in &self.entries {
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
        d
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> T {
        let mut rows = vec![T::zero(); self.n];
        for &(i, j, v) in &self.entries {
            rows[i] = rows[i] + v.abs();
            if i != j {
                rows[j] = rows[j] + v.abs();
            }
        }
        rows.into_iter().fold(T::zero(), T::max)
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.matvec(&vec![T::one(); self.n])
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    /// Adjacency lists of the off-diagonal pattern.
    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, _) in &self.entries {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        adj
    }

    pub fn cast<U: Scalar>(&self) -> SparseSymMatrix<U> {
        SparseSymMatrix {
            n: self.n,
            entries: self
                .entries
                .iter()
                .map(|&(i, j, v)| (i, j, U::of(v.as_f64())))
                .collect(),
        }
    }
}

/// Positive semi-definite cotangent Laplacian.
///
/// Every triangle adds `cot(angle)/2` to the weight of its opposite edge, so
/// boundary and non-manifold edges simply collect one term per incident face.
/// `L_ij = -w_ij`, `L_ii = sum_j w_ij`. Degenerate faces are skipped.
pub fn cotangent_laplacian<T: Scalar>(mesh: &Mesh<T>) -> Result<SparseSymMatrix<T>, GeometryError> {
    let cot_max = T::one() / T::of(EPS_ANGLE).tan();
    let half = T::of(0.5);
    let tiny = T::of(super::EPS_AREA);
    let mut weights: Vec<(usize, usize, T)> = Vec::with_capacity(mesh.face_count() * 3);
    let mut used_faces = 0usize;
    for tri in &mesh.faces {
        let p = tri.map(|v| mesh.vertices[v]);
        if half * norm(cross(sub(p[1], p[0]), sub(p[2], p[0]))) <= tiny {
            continue;
        }
        used_faces += 1;
        for k in 0..3 {
            let (i, j) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let u = sub(p[(k + 1) % 3], p[k]);
            let v = sub(p[(k + 2) % 3], p[k]);
            let cot = (dot(u, v) / norm(cross(u, v))).max(-cot_max).min(cot_max);
            weights.push((i, j, half * cot));
        }
    }
    if used_faces == 0 {
        return Err(GeometryError::DegenerateMesh);
    }
    let n = mesh.vertex_count();
    let offdiag = SparseSymMatrix::from_triplets(n, weights);
    let mut diag = vec![T::zero(); n];
    let mut triplets = Vec::with_capacity(offdiag.entries.len() + n);
    for &(i, j, w) in &offdiag.entries {
        diag[i] = diag[i] + w;
        diag[j] = diag[j] + w;
        triplets.push((i, j, -w));
    }
    triplets.extend(diag.into_iter().enumerate().map(|(i, d)| (i, i, d)));
    Ok(SparseSymMatrix::from_triplets(n, triplets))
}

/// Barycentric lumped mass: one third of the incident face areas per
/// vertex, never zero.
pub fn mass_matrix<T: Scalar>(mesh: &Mesh<T>, faces: &FaceGeometry<T>) -> SparseSymMatrix<T> {
    let n = mesh.vertex_count();
    let third = T::one() / T::of(3.0);
    let mut m = vec![T::zero(); n];
    for (f, tri) in mesh.faces.iter().enumerate() {
        for &v in tri {
            m[v] = m[v] + third * faces.areas[f];
        }
    }
    let total: T = faces.areas.iter().copied().sum();
    let eps = T::of(EPS_MASS_REL) * total / T::of_usize(n.max(1));
    SparseSymMatrix {
        n,
        entries: m
            .into_iter()
            .enumerate()
            .map(|(i, v)| (i, i, if v > T::zero() { v } else { eps }))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::face_geometry;
    use crate::mesh::primitives;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn equilateral() -> Mesh<f64> {
        Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 3f64.sqrt() / 2.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn equilateral_triangle_weights() {
        let l = cotangent_laplacian(&equilateral()).unwrap();
        let d = l.to_dense();
        let w = 1.0 / (2.0 * 3f64.sqrt());
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 2.0 * w } else { -w };
                assert!((d[i * 3 + j] - expect).abs() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn rows_sum_to_zero() {
        let m = primitives::icosphere(2);
        let l = cotangent_laplacian(&m).unwrap();
        let dense = l.to_dense();
        for (i, s) in l.row_sums().iter().enumerate() {
            let rmax = dense[i * l.n..(i + 1) * l.n].iter().fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(s.abs() <= 1e-10 * rmax);
        }
    }

    #[test]
    fn laplacian_is_positive_semidefinite_on_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base = primitives::icosphere(2);
        let m = base.map_vertices(|p| {
            let s = 1.0 + 0.2 * (p[0] * 3.0).sin();
            [p[0] * s, p[1], p[2] * 1.3]
        });
        let l = cotangent_laplacian(&m).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..l.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lx = l.matvec(&x);
            let q: f64 = x.iter().zip(&lx).map(|(a, b)| a * b).sum();
            assert!(q >= -1e-9);
        }
    }

    #[test]
    fn all_degenerate_is_error() {
        let m = Mesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert_eq!(cotangent_laplacian(&m), Err(GeometryError::DegenerateMesh));
    }

    #[test]
    fn single_triangle_mass() {
        let m = equilateral();
        let g = face_geometry(&m);
        let mm = mass_matrix(&m, &g);
        assert!(mm.is_diagonal());
        for d in mm.diagonal() {
            assert!((d - g.areas[0] / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mass_trace_is_surface_area() {
        let m = primitives::subdivided_cube(4);
        let g = face_geometry(&m);
        let tr = mass_matrix(&m, &g).trace();
        assert!((tr - 24.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_vertex_gets_positive_mass() {
        let mut v = equilateral().vertices;
        v.push([4.0, 4.0, 4.0]);
        let m = Mesh::new(v, vec![[0, 1, 2]]).unwrap();
        let d = mass_matrix(&m, &face_geometry(&m)).diagonal();
        assert!(d[3] > 0.0 && d[3] < 1e-12);
    }

    #[test]
    fn scaling_leaves_laplacian_and_scales_mass() {
        let m = primitives::icosphere(1);
        let s = 2.5;
        let ms = m.map_vertices(|p| p.map(|c| c * s));
        let (l, ls) = (cotangent_laplacian(&m).unwrap(), cotangent_laplacian(&ms).unwrap());
        for (a, b) in l.entries.iter().zip(&ls.entries) {
            assert!((a.2 - b.2).abs() < 1e-9);
        }
        let mm = mass_matrix(&m, &face_geometry(&m)).diagonal();
        let mms = mass_matrix(&ms, &face_geometry(&ms)).diagonal();
        for (a, b) in mm.iter().zip(&mms) {
            assert!((a * s * s - b).abs() < 1e-12);
        }
    }
}
