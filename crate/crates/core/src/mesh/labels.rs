use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Mesh, MeshError, MeshResult};
use crate::scalar::Scalar;

/// Parses one base-10 non-negative integer per line. Blank lines are skipped.
pub fn parse_labels_str(text: &str) -> MeshResult<Vec<u32>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let t = l.trim();
            t.parse::<u32>().map_err(|_| MeshError::NonIntegerLabel {
                line: i + 1,
                text: t.to_string(),
            })
        })
        .collect()
}

/// Reads a per-face label file and attaches it to `mesh`.
pub fn attach_face_labels<T: Scalar>(mesh: Mesh<T>, path: &Path) -> MeshResult<Mesh<T>> {
    let text = fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let labels = parse_labels_str(&text)?;
    mesh.with_face_labels(labels)
}

pub fn write_labels(labels: &[u32], path: &Path) -> MeshResult<()> {
    let mut out = String::with_capacity(labels.len() * 2);
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    fs::write(path, out).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })
}
