use super::PipelineError;
use crate::mesh::Mesh;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexTargets {
    pub labels: Vec<usize>,
    /// Vertices in no face; they were assigned class 0.
    pub isolated: Vec<usize>,
}

/// Majority label of the faces around each vertex, smallest class on ties.
pub fn derive_vertex_targets<T: Scalar>(mesh: &Mesh<T>) -> Result<VertexTargets, PipelineError> {
    let face_labels = mesh.face_labels.as_ref().ok_or(PipelineError::MissingLabels)?;
    let k = face_labels.iter().copied().max().map_or(1, |m| m as usize + 1);
    let n = mesh.vertex_count();
    let mut counts = vec![0u32; n * k];
    for (f, tri) in mesh.faces.iter().enumerate() {
        for &v in tri {
            counts[v * k + face_labels[f] as usize] += 1;
        }
    }
    let mut isolated = Vec::new();
    let labels = (0..n)
        .map(|v| {
            let row = &counts[v * k..(v + 1) * k];
            let mut best = 0;
            for (c, &cnt) in row.iter().enumerate() {
                if cnt > row[best] {
                    best = c;
                }
            }
            if row[best] == 0 {
                isolated.push(v);
            }
            best
        })
        .collect();
    Ok(VertexTargets { labels, isolated })
}
