//! Procedural meshes used by tests, benchmarks and synthetic datasets.

use std::collections::HashMap;

use super::Mesh;

/// Unit-radius icosphere; `subdivisions = 0` is the icosahedron.
///
/// Face count is `20 * 4^subdivisions`; faces are wound outward.
pub fn icosphere(subdivisions: u32) -> Mesh<f64> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(unit)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vs: &mut Vec<[f64; 3]>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (vs[a], vs[b]);
                vs.push(unit([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                vs.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Mesh::new(vertices, faces).expect("icosphere is valid")
}

fn unit(p: [f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

/// Axis-aligned cube `[-1, 1]^3` with each side split into an `n x n` grid of
/// quads (two triangles each), welded along the cube edges and wound outward.
pub fn subdivided_cube(n: usize) -> Mesh<f64> {
    assert!(n >= 1);
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let n_i = n as i64;
    let mut vid = |g: [i64; 3], vs: &mut Vec<[f64; 3]>| -> usize {
        *index.entry(g).or_insert_with(|| {
            vs.push(g.map(|c| 2.0 * c as f64 / n as f64 - 1.0));
            vs.len() - 1
        })
    };
    // (normal axis, side, u axis, v axis) with u x v pointing along the outward normal.
    let sides = [
        (0, n_i, 1, 2),
        (0, 0, 2, 1),
        (1, n_i, 2, 0),
        (1, 0, 0, 2),
        (2, n_i, 0, 1),
        (2, 0, 1, 0),
    ];
    for (axis, level, u, v) in sides {
        for i in 0..n_i {
            for j in 0..n_i {
                let at = |di: i64, dj: i64| {
                    let mut g = [0i64; 3];
                    g[axis] = level;
                    g[u] = i + di;
                    g[v] = j + dj;
                    g
                };
                let a = vid(at(0, 0), &mut vertices);
                let b = vid(at(1, 0), &mut vertices);
                let c = vid(at(1, 1), &mut vertices);
                let d = vid(at(0, 1), &mut vertices);
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
    }
    Mesh::new(vertices, faces).expect("cube is valid")
}

/// Flat `nx x ny` grid of unit squares in the z = 0 plane.
pub fn grid(nx: usize, ny: usize) -> Mesh<f64> {
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([i as f64, j as f64, 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::new(vertices, faces).expect("grid is valid")
}

fn tetrahedron_faces(a: usize, b: usize, c: usize, d: usize) -> [[usize; 3]; 4] {
    [[a, c, b], [a, b, d], [b, c, d], [a, d, c]]
}

/// Two tetrahedra glued along the single edge (0, 1): that edge borders four
/// faces.
pub fn two_tetrahedra_sharing_edge() -> Mesh<f64> {
    let vertices = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.5, 1.0, 0.0],
        [0.5, 0.4, 1.0],
        [0.5, -1.0, 0.2],
        [0.5, -0.4, -1.0],
    ];
    let mut faces = tetrahedron_faces(0, 1, 2, 3).to_vec();
    faces.extend(tetrahedron_faces(0, 1, 4, 5));
    Mesh::new(vertices, faces).expect("valid")
}

/// Two disjoint tetrahedra, i.e. a mesh with two connected components.
pub fn two_disjoint_tetrahedra() -> Mesh<f64> {
    let mut vertices = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ];
    vertices.extend(vertices.clone().iter().map(|p| [p[0] + 3.0, p[1], p[2]]));
    let mut faces = tetrahedron_faces(0, 1, 2, 3).to_vec();
    faces.extend(tetrahedron_faces(4, 5, 6, 7));
    Mesh::new(vertices, faces).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{face_geometry, validate};

    #[test]
    fn icosphere_counts() {
        for s in 0..4 {
            let m = icosphere(s);
            assert_eq!(m.face_count(), 20 * 4usize.pow(s));
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(s) + 2);
            let r = validate(&m);
            assert!(r.is_watertight);
        }
    }

    #[test]
    fn cube_is_closed_and_outward() {
        let m = subdivided_cube(3);
        assert_eq!(m.face_count(), 6 * 2 * 9);
        assert_eq!(m.vertex_count(), 6 * 9 + 2);
        assert!(validate(&m).is_watertight);
        let g = face_geometry(&m);
        for (f, n) in m.faces.iter().zip(&g.normals) {
            let c: Vec<f64> = (0..3)
                .map(|k| (m.vertices[f[0]][k] + m.vertices[f[1]][k] + m.vertices[f[2]][k]) / 3.0)
                .collect();
            assert!(c[0] * n[0] + c[1] * n[1] + c[2] * n[2] > 0.0);
        }
    }

    #[test]
    fn tetrahedra_are_outward() {
        let m = two_disjoint_tetrahedra();
        let g = face_geometry(&m);
        for (fi, f) in m.faces.iter().enumerate() {
            let base = if fi < 4 { 0 } else { 4 };
            let centre: Vec<f64> = (0..3)
                .map(|k| (0..4).map(|i| m.vertices[base + i][k]).sum::<f64>() / 4.0)
                .collect();
            let p = m.vertices[f[0]];
            let d: f64 = (0..3).map(|k| (p[k] - centre[k]) * g.normals[fi][k]).sum();
            assert!(d > 0.0);
        }
    }
}
