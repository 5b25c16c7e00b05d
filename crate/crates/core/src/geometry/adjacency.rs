use std::collections::HashMap;

use serde::Serialize;

use crate::mesh::Mesh;
use crate::scalar::Scalar;

/// Undirected edges of a mesh with the faces incident to each.
///
/// Edges are stored sorted by `(min, max)` vertex pair so iteration order is
/// deterministic.
#[derive(Debug, Clone)]
pub struct EdgeAdjacency {
    pub edges: Vec<[usize; 2]>,
    pub faces: Vec<Vec<usize>>,
    index: HashMap<[usize; 2], usize>,
}

impl EdgeAdjacency {
    pub fn build<T: Scalar>(mesh: &Mesh<T>) -> Self {
        let mut incidences: Vec<([usize; 2], usize)> = Vec::with_capacity(mesh.faces.len() * 3);
        for (f, tri) in mesh.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                incidences.push(([a.min(b), a.max(b)], f));
            }
        }
        incidences.sort_unstable();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut faces: Vec<Vec<usize>> = Vec::new();
        for (e, f) in incidences {
            if edges.last() == Some(&e) {
                faces.last_mut().unwrap().push(f);
            } else {
                edges.push(e);
                faces.push(vec![f]);
            }
        }
        let index = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        EdgeAdjacency { edges, faces, index }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn find(&self, a: usize, b: usize) -> Option<usize> {
        self.index.get(&[a.min(b), a.max(b)]).copied()
    }

    pub fn is_boundary(&self, edge: usize) -> bool {
        self.faces[edge].len() == 1
    }

    pub fn is_non_manifold(&self, edge: usize) -> bool {
        self.faces[edge].len() > 2
    }

    pub fn boundary_flags(&self) -> Vec<bool> {
        (0..self.len()).map(|e| self.is_boundary(e)).collect()
    }
}

/// Structural summary of a mesh. Problems are reported, never rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub vertex_count: usize,
    pub face_count: usize,
    pub edge_count: usize,
    pub boundary_edges: usize,
    pub non_manifold_edges: usize,
    pub isolated_vertices: usize,
    pub components: usize,
    pub is_manifold: bool,
    pub is_watertight: bool,
}

fn find_root(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn validate<T: Scalar>(mesh: &Mesh<T>) -> ValidationReport {
    let adj = EdgeAdjacency::build(mesh);
    let n = mesh.vertex_count();
    let boundary_edges = (0..adj.len()).filter(|&e| adj.is_boundary(e)).count();
    let non_manifold_edges = (0..adj.len()).filter(|&e| adj.is_non_manifold(e)).count();

    let mut used = vec![false; n];
    let mut parent: Vec<usize> = (0..n).collect();
    for tri in &mesh.faces {
        for &v in tri {
            used[v] = true;
        }
    }
    for e in &adj.edges {
        let (ra, rb) = (find_root(&mut parent, e[0]), find_root(&mut parent, e[1]));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let isolated_vertices = used.iter().filter(|u| !**u).count();
    let components = (0..n)
        .filter(|&v| used[v] && find_root(&mut parent, v) == v)
        .count();

    ValidationReport {
        vertex_count: n,
        face_count: mesh.face_count(),
        edge_count: adj.len(),
        boundary_edges,
        non_manifold_edges,
        isolated_vertices,
        components,
        is_manifold: non_manifold_edges == 0,
        is_watertight: boundary_edges == 0 && non_manifold_edges == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn every_face_contributes_three_incidences() {
        let m = primitives::icosphere(1);
        let adj = EdgeAdjacency::build(&m);
        let total: usize = adj.faces.iter().map(Vec::len).sum();
        assert_eq!(total, 3 * m.face_count());
        assert!(adj.boundary_flags().iter().all(|b| !b));
        assert_eq!(adj.len(), 3 * m.face_count() / 2);
    }

    #[test]
    fn single_triangle_is_all_boundary() {
        let m = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let adj = EdgeAdjacency::build(&m);
        assert_eq!(adj.boundary_flags(), vec![true; 3]);
        assert_eq!(adj.find(2, 1), Some(2));
        let r = validate(&m);
        assert!(r.is_manifold && !r.is_watertight);
        assert_eq!(r.components, 1);
    }

    #[test]
    fn tetrahedra_sharing_an_edge_flagged_non_manifold() {
        let m = primitives::two_tetrahedra_sharing_edge();
        let r = validate(&m);
        assert_eq!(r.face_count, 8);
        assert!(!r.is_manifold);
        assert_eq!(r.non_manifold_edges, 1);
        assert_eq!(r.components, 1);
    }

    #[test]
    fn counts_components_and_isolated_vertices() {
        let m = primitives::two_disjoint_tetrahedra();
        assert_eq!(validate(&m).components, 2);
        let mut v = m.vertices.clone();
        v.push([5.0, 5.0, 5.0]);
        let m2 = Mesh::new(v, m.faces.clone()).unwrap();
        let r = validate(&m2);
        assert_eq!(r.isolated_vertices, 1);
        assert_eq!(r.components, 2);
    }
}
