use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::autodiff::Tensor;
use crate::geometry::{edge_dihedral_angles, face_geometry, vertex_dihedral_features, vertex_normals, EdgeAdjacency};
use crate::mesh::{normalize_unit_scale, Mesh};
use crate::spectral::{compute_hks, mesh_spectrum, standardize_channels, EigenOptions, DEFAULT_EIGENPAIRS, DEFAULT_TIME_SCALES};

/// Per-vertex input feature families, laid out as
/// `[xyz | normal | dihedral | hks]` with absent blocks skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureToggles {
    pub xyz: bool,
    pub normal: bool,
    pub dihedral: bool,
    pub hks: bool,
}

pub const XYZ_CHANNELS: usize = 3;
pub const NORMAL_CHANNELS: usize = 3;
pub const DIHEDRAL_CHANNELS: usize = 4;
pub const HKS_CHANNELS: usize = DEFAULT_TIME_SCALES;

/// Column offsets of each enabled block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeatureLayout {
    pub xyz: Option<usize>,
    pub normal: Option<usize>,
    pub dihedral: Option<usize>,
    pub hks: Option<usize>,
    pub channels: usize,
}

impl FeatureToggles {
    pub const ALL: FeatureToggles = FeatureToggles {
        xyz: true,
        normal: true,
        dihedral: true,
        hks: true,
    };

    /// The cumulative configurations of the input-feature ablation.
    pub const ABLATION: [FeatureToggles; 4] = [
        FeatureToggles {
            xyz: true,
            normal: false,
            dihedral: false,
            hks: false,
        },
        FeatureToggles {
            xyz: true,
            normal: true,
            dihedral: false,
            hks: false,
        },
        FeatureToggles {
            xyz: true,
            normal: true,
            dihedral: true,
            hks: false,
        },
        FeatureToggles::ALL,
    ];

    pub fn any(&self) -> bool {
        self.xyz || self.normal || self.dihedral || self.hks
    }

    pub fn layout(&self) -> FeatureLayout {
        let mut l = FeatureLayout::default();
        let mut at = 0;
        let mut place = |on: bool, width: usize| {
            on.then(|| {
                let o = at;
                at += width;
                o
            })
        };
        l.xyz = place(self.xyz, XYZ_CHANNELS);
        l.normal = place(self.normal, NORMAL_CHANNELS);
        l.dihedral = place(self.dihedral, DIHEDRAL_CHANNELS);
        l.hks = place(self.hks, HKS_CHANNELS);
        l.channels = at;
        l
    }

    pub fn channels(&self) -> usize {
        self.layout().channels
    }
}

impl Default for FeatureToggles {
    fn default() -> Self {
        FeatureToggles::ALL
    }
}

impl fmt::Display for FeatureToggles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.xyz, "xyz"),
            (self.normal, "normal"),
            (self.dihedral, "dihedral"),
            (self.hks, "hks"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for FeatureToggles {
    type Err = PipelineError;

    /// Comma-separated subset of `xyz,normal,dihedral,hks`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut t = FeatureToggles {
            xyz: false,
            normal: false,
            dihedral: false,
            hks: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "xyz" => t.xyz = true,
                "normal" | "normals" => t.normal = true,
                "dihedral" => t.dihedral = true,
                "hks" => t.hks = true,
                other => return Err(PipelineError::InvalidConfig(format!("unknown feature family '{other}'"))),
            }
        }
        if !t.any() {
            return Err(PipelineError::InvalidConfig("at least one feature family is required".into()));
        }
        Ok(t)
    }
}

/// Relabels vertices in lexicographic position order and sorts the faces,
/// so every floating-point reduction downstream runs in the same sequence
/// however the input was indexed. Returns the mesh and `rank[old]`.
/// Coincident vertices keep their input order.
fn canonical_order(mesh: &Mesh<f64>) -> Result<(Mesh<f64>, Vec<usize>), PipelineError> {
    let n = mesh.vertex_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
        p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])).then(p[2].total_cmp(&q[2]))
    });
    let mut rank = vec![0; n];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    let mut faces: Vec<[usize; 3]> = mesh
        .faces
        .iter()
        .map(|f| {
            let g = f.map(|v| rank[v]);
            let lead = (0..3).min_by_key(|&i| g[i]).unwrap_or(0);
            [g[lead], g[(lead + 1) % 3], g[(lead + 2) % 3]]
        })
        .collect();
    faces.sort_unstable();
    let vertices = order.iter().map(|&v| mesh.vertices[v]).collect();
    Ok((Mesh::new(vertices, faces)?, rank))
}

/// Per-vertex feature matrix of a mesh (normalized to unit scale first).
/// The HKS block uses up to 128 eigenpairs and 16 time scales and is
/// standardized per channel over the mesh. The result does not depend on
/// how vertices or faces are numbered: relabelling the input permutes the
/// rows and changes no bits.
pub fn assemble_features(mesh: &Mesh<f64>, toggles: FeatureToggles) -> Result<Tensor<f32>, PipelineError> {
    if !toggles.any() {
        return Err(PipelineError::InvalidConfig("no feature family enabled".into()));
    }
    let (canonical, rank) = canonical_order(mesh)?;
    let f = canonical_features(&canonical, toggles)?;
    let c = f.cols();
    let mut out = Vec::with_capacity(rank.len() * c);
    for &r in &rank {
        out.extend_from_slice(f.row(r));
    }
    Ok(Tensor::from_vec(rank.len(), c, out)?)
}

fn canonical_features(mesh: &Mesh<f64>, toggles: FeatureToggles) -> Result<Tensor<f32>, PipelineError> {
    let mesh = normalize_unit_scale(mesh)?;
    let n = mesh.vertex_count();
    let layout = toggles.layout();
    let mut out = vec![0.0f64; n * layout.channels];
    let c = layout.channels;
    let fg = face_geometry(&mesh);
    if let Some(o) = layout.xyz {
        for (v, p) in mesh.vertices.iter().enumerate() {
            out[v * c + o..v * c + o + 3].copy_from_slice(p);
        }
    }
    if let Some(o) = layout.normal {
        let normals = vertex_normals(&mesh, &fg);
        for (v, nv) in normals.normals.iter().enumerate() {
            out[v * c + o..v * c + o + 3].copy_from_slice(nv);
        }
    }
    if let Some(o) = layout.dihedral {
        let adj = EdgeAdjacency::build(&mesh);
        let angles = edge_dihedral_angles(&adj, &fg);
        for (v, d) in vertex_dihedral_features(n, &adj, &angles).iter().enumerate() {
            out[v * c + o..v * c + o + 4].copy_from_slice(d);
        }
    }
    if let Some(o) = layout.hks {
        let basis = mesh_spectrum(&mesh, DEFAULT_EIGENPAIRS.min(n), &EigenOptions::default())?;
        let mut h = compute_hks(&basis, HKS_CHANNELS)?.values;
        standardize_channels(&mut h, n, HKS_CHANNELS);
        for v in 0..n {
            out[v * c + o..v * c + o + HKS_CHANNELS].copy_from_slice(&h[v * HKS_CHANNELS..(v + 1) * HKS_CHANNELS]);
        }
    }
    Ok(Tensor::from_vec(n, c, out.into_iter().map(|x| x as f32).collect())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn toggles_parse_and_layout() {
        let all: FeatureToggles = "xyz,normal,dihedral,hks".parse().unwrap();
        assert_eq!(all, FeatureToggles::ALL);
        assert_eq!(all.channels(), 26);
        assert_eq!(all.to_string(), "xyz,normal,dihedral,hks");
        let xyz: FeatureToggles = "xyz".parse().unwrap();
        assert_eq!(xyz.channels(), 3);
        let l: FeatureToggles = "hks, dihedral".parse().unwrap();
        assert_eq!(l.layout().dihedral, Some(0));
        assert_eq!(l.layout().hks, Some(4));
        assert!("".parse::<FeatureToggles>().is_err());
        assert!("xyz,curvature".parse::<FeatureToggles>().is_err());
        let widths: Vec<usize> = FeatureToggles::ABLATION.iter().map(|t| t.channels()).collect();
        assert_eq!(widths, vec![3, 6, 10, 26]);
    }

    #[test]
    fn blocks_are_independent() {
        let mesh = primitives::subdivided_cube(3);
        let full = assemble_features(&mesh, FeatureToggles::ALL).unwrap();
        assert_eq!(full.shape(), (mesh.vertex_count(), 26));
        let no_hks = assemble_features(
            &mesh,
            FeatureToggles {
                hks: false,
                ..FeatureToggles::ALL
            },
        )
        .unwrap();
        for v in 0..mesh.vertex_count() {
            assert_eq!(&full.row(v)[..10], no_hks.row(v));
        }
        assert!(full.is_finite());
    }

    #[test]
    fn relabelling_permutes_rows_bitwise() {
        let mesh = primitives::subdivided_cube(3).map_vertices(|p| [p[0] + 0.1 * p[1] * p[1], p[1], p[2] * 1.3]);
        let n = mesh.vertex_count();
        // perm[new] = old, with faces renumbered and rotated.
        let perm: Vec<usize> = (0..n).map(|i| (i * 17 + 5) % n).collect();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let vertices = perm.iter().map(|&o| mesh.vertices[o]).collect();
        let mut faces: Vec<[usize; 3]> = mesh.faces.iter().map(|f| [inv[f[1]], inv[f[2]], inv[f[0]]]).collect();
        faces.reverse();
        let relabelled = Mesh::new(vertices, faces).unwrap();
        let a = assemble_features(&mesh, FeatureToggles::ALL).unwrap();
        let b = assemble_features(&relabelled, FeatureToggles::ALL).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            let (x, y): (Vec<u32>, Vec<u32>) = (
                a.row(old).iter().map(|v| v.to_bits()).collect(),
                b.row(new).iter().map(|v| v.to_bits()).collect(),
            );
            assert_eq!(x, y);
        }
    }

    #[test]
    fn xyz_block_is_unit_scaled() {
        let mesh = primitives::icosphere(1).map_vertices(|p| [3.0 * p[0] + 5.0, 3.0 * p[1], 3.0 * p[2] - 1.0]);
        let f = assemble_features(&mesh, "xyz".parse().unwrap()).unwrap();
        let max_r = (0..f.rows())
            .map(|v| f.row(v).iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        assert!((max_r - 1.0).abs() < 1e-6);
    }
}
