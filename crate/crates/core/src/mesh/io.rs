//! OFF and OBJ readers plus an OBJ writer with per-class materials.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Mesh, MeshError, MeshResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    /// Pick by file extension, falling back to sniffing the first token.
    Auto,
}

impl MeshFormat {
    fn resolve(self, path: &Path, text: &str) -> MeshFormat {
        match self {
            MeshFormat::Auto => {
                let ext = path
                    .extension()
                    .and_then(|e| e.to_str())
                    .map(|e| e.to_ascii_lowercase());
                match ext.as_deref() {
                    Some("off") => MeshFormat::Off,
                    Some("obj") => MeshFormat::Obj,
                    _ if text.trim_start().starts_with("OFF") => MeshFormat::Off,
                    _ => MeshFormat::Obj,
                }
            }
            f => f,
        }
    }
}

/// Reads a triangle mesh from disk. Polygons are fan-triangulated.
pub fn parse_mesh(path: &Path, format: MeshFormat) -> MeshResult<Mesh<f64>> {
    let text = fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path.display().to_string();
    match format.resolve(path, &text) {
        MeshFormat::Off => parse_off_named(&text, &name),
        _ => parse_obj_named(&text, &name),
    }
}

pub fn parse_off_str(text: &str) -> MeshResult<Mesh<f64>> {
    parse_off_named(text, "<off>")
}

pub fn parse_obj_str(text: &str) -> MeshResult<Mesh<f64>> {
    parse_obj_named(text, "<obj>")
}

fn perr(path: &str, line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

fn fan(poly: &[usize], faces: &mut Vec<[usize; 3]>) {
    for i in 1..poly.len() - 1 {
        faces.push([poly[0], poly[i], poly[i + 1]]);
    }
}

fn parse_off_named(text: &str, path: &str) -> MeshResult<Mesh<f64>> {
    // Tokens with their 1-based line numbers, comments stripped.
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| perr(path, 1, "empty file"))?;
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| perr(path, hline, "missing OFF header"))?
        .trim();
    let counts_line = if rest.is_empty() {
        lines
            .next()
            .ok_or_else(|| perr(path, hline, "missing counts line"))?
    } else {
        (hline, rest)
    };
    let counts: Vec<usize> = counts_line
        .1
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| perr(path, counts_line.0, "malformed counts line"))?;
    if counts.len() < 2 {
        return Err(perr(path, counts_line.0, "counts line needs V F [E]"));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(path, counts_line.0, "unexpected end of vertex list"))?;
        let xyz: Vec<f64> = l
            .split_whitespace()
            .take(3)
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| perr(path, ln, "malformed vertex"))?;
        if xyz.len() != 3 || xyz.iter().any(|c| !c.is_finite()) {
            return Err(perr(path, ln, "vertex needs three finite coordinates"));
        }
        vertices.push([xyz[0], xyz[1], xyz[2]]);
    }

    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(path, counts_line.0, "unexpected end of face list"))?;
        let mut toks = l.split_whitespace();
        let k: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| perr(path, ln, "malformed face arity"))?;
        if k < 3 {
            return Err(perr(path, ln, "face needs at least 3 vertices"));
        }
        let idx: Vec<usize> = toks
            .take(k)
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| perr(path, ln, "malformed face index"))?;
        if idx.len() != k {
            return Err(perr(path, ln, "face has fewer indices than declared"));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= nv) {
            return Err(perr(path, ln, format!("index {bad} out of range")));
        }
        check_distinct(&idx, path, ln)?;
        fan(&idx, &mut faces);
    }
    if faces.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    Mesh::new(vertices, faces)
}

fn check_distinct(idx: &[usize], path: &str, ln: usize) -> MeshResult<()> {
    for i in 0..idx.len() {
        if idx[i + 1..].contains(&idx[i]) {
            return Err(perr(path, ln, format!("repeated index {} in face", idx[i])));
        }
    }
    Ok(())
}

fn parse_obj_named(text: &str, path: &str) -> MeshResult<Mesh<f64>> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut toks = l.split_whitespace();
        match toks.next() {
            Some("v") => {
                let xyz: Vec<f64> = toks
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| perr(path, ln, "malformed vertex"))?;
                if xyz.len() != 3 || xyz.iter().any(|c| !c.is_finite()) {
                    return Err(perr(path, ln, "vertex needs three finite coordinates"));
                }
                vertices.push([xyz[0], xyz[1], xyz[2]]);
            }
            Some("f") => {
                let nv = vertices.len() as i64;
                let mut poly = Vec::new();
                for t in toks {
                    let pos = t.split('/').next().unwrap_or("");
                    let raw: i64 = pos
                        .parse()
                        .map_err(|_| perr(path, ln, format!("malformed face index `{t}`")))?;
                    let idx = match raw {
                        r if r > 0 && r <= nv => r - 1,
                        r if r < 0 && -r <= nv => nv + r,
                        _ => return Err(perr(path, ln, format!("index {raw} out of range"))),
                    };
                    poly.push(idx as usize);
                }
                if poly.len() < 3 {
                    return Err(perr(path, ln, "face needs at least 3 vertices"));
                }
                check_distinct(&poly, path, ln)?;
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    Mesh::new(vertices, faces)
}

fn write_file(path: &Path, text: &str) -> MeshResult<()> {
    fs::write(path, text).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn obj_vertices(mesh: &Mesh<f64>, out: &mut String) {
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
}

/// Writes geometry only.
pub fn write_obj(mesh: &Mesh<f64>, path: &Path) -> MeshResult<()> {
    let mut out = String::new();
    obj_vertices(mesh, &mut out);
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    write_file(path, &out)
}

const PALETTE: [[f32; 3]; 12] = [
    [0.894, 0.102, 0.110],
    [0.216, 0.494, 0.722],
    [0.302, 0.686, 0.290],
    [0.596, 0.306, 0.639],
    [1.000, 0.498, 0.000],
    [1.000, 1.000, 0.200],
    [0.651, 0.337, 0.157],
    [0.969, 0.506, 0.749],
    [0.600, 0.600, 0.600],
    [0.400, 0.761, 0.647],
    [0.553, 0.627, 0.796],
    [0.906, 0.541, 0.765],
];

/// Writes an OBJ whose faces are grouped into one material per class id,
/// plus a sibling `.mtl` library holding the palette colors. Face order is
/// preserved so re-parsing yields the same index triples.
pub fn write_labeled_mesh(mesh: &Mesh<f64>, labels: &[u32], path: &Path) -> MeshResult<()> {
    if labels.len() != mesh.faces.len() {
        return Err(MeshError::LengthMismatch {
            labels: labels.len(),
            faces: mesh.faces.len(),
        });
    }
    let mtl_path = path.with_extension("mtl");
    let mtl_name = mtl_path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("labels.mtl")
        .to_string();

    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut mtl = String::new();
    for &c in &classes {
        let [r, g, b] = PALETTE[c as usize % PALETTE.len()];
        let _ = writeln!(mtl, "newmtl class_{c}\nKd {r} {g} {b}\n");
    }

    let mut out = String::new();
    let _ = writeln!(out, "mtllib {mtl_name}");
    obj_vertices(mesh, &mut out);
    let mut current = None;
    for (f, &label) in mesh.faces.iter().zip(labels) {
        if current != Some(label) {
            let _ = writeln!(out, "usemtl class_{label}");
            current = Some(label);
        }
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    write_file(&mtl_path, &mtl)?;
    write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_off() {
        let m = parse_off_str("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2").unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn off_counts_on_header_line_and_comments() {
        let m = parse_off_str("OFF 4 1 0 # c\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn off_errors() {
        assert!(matches!(parse_off_str("OFF\n3 0 0\n0 0 0\n1 0 0\n0 1 0\n"), Err(MeshError::EmptyMesh)));
        assert!(matches!(parse_off_str("PLY\n"), Err(MeshError::Parse { .. })));
        assert!(matches!(
            parse_off_str("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7"),
            Err(MeshError::Parse { .. })
        ));
        assert!(matches!(
            parse_off_str("OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2"),
            Err(MeshError::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn obj_quad_is_fan_triangulated() {
        let m = parse_obj_str("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_slash_and_negative_indices() {
        let m = parse_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 -1\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
        assert!(matches!(parse_obj_str("v 0 0 0\nf 1 2 3\n"), Err(MeshError::Parse { .. })));
        assert!(matches!(parse_obj_str("v 0 0 0\n"), Err(MeshError::EmptyMesh)));
    }

    #[test]
    fn single_labeled_face_has_one_face_statement() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.obj");
        let m = parse_off_str("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2").unwrap();
        write_labeled_mesh(&m, &[0], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 1);
        assert!(dir.path().join("one.mtl").exists());
        let back = parse_mesh(&path, MeshFormat::Auto).unwrap();
        assert_eq!(back.faces, m.faces);
        assert_eq!(back.vertices, m.vertices);
    }

    #[test]
    fn label_length_mismatch_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let m = parse_off_str("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2").unwrap();
        assert!(matches!(
            write_labeled_mesh(&m, &[0, 1], &dir.path().join("x.obj")),
            Err(MeshError::LengthMismatch { .. })
        ));
    }
}
