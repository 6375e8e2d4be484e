//! Line-based polygonal mesh text format.
//!
//! ```text
//! # comment
//! v x y          vertex coordinates
//! c i1 i2 ... in counter-clockwise vertex loop of one cell
//! ```

use std::path::Path;

use serde::Serialize;

use super::coarse::{CoarseMesh, MeshError};
use super::Point;

/// Parse a mesh from its text representation.
pub fn parse_mesh(text: &str) -> Result<CoarseMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut polygons = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let tag = tok.next().unwrap();
        let parse_err = |msg: String| MeshError::Parse {
            line: lineno + 1,
            msg,
        };
        match tag {
            "v" => {
                let x: f64 = tok
                    .next()
                    .ok_or_else(|| parse_err("missing x".into()))?
                    .parse()
                    .map_err(|e| parse_err(format!("bad x: {e}")))?;
                let y: f64 = tok
                    .next()
                    .ok_or_else(|| parse_err("missing y".into()))?
                    .parse()
                    .map_err(|e| parse_err(format!("bad y: {e}")))?;
                vertices.push(Point::new(x, y));
            }
            "c" => {
                let loop_: Result<Vec<usize>, _> = tok.map(|t| t.parse::<usize>()).collect();
                let loop_ = loop_.map_err(|e| parse_err(format!("bad vertex index: {e}")))?;
                polygons.push(loop_);
            }
            other => return Err(parse_err(format!("unknown record '{other}'"))),
        }
    }
    CoarseMesh::from_polygons(vertices, polygons)
}

/// Load a mesh from a text file.
pub fn load_polygonal_mesh(path: impl AsRef<Path>) -> Result<CoarseMesh, MeshError> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

/// Serialize a mesh to the text format (round-trips through `parse_mesh`).
pub fn format_mesh(mesh: &CoarseMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        out.push_str(&format!("v {:.17e} {:.17e}\n", v.x, v.y));
    }
    for c in &mesh.cells {
        out.push('c');
        for &v in &c.vertices {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
    }
    out
}

/// Counts and size statistics of a coarse mesh.
#[derive(Debug, Serialize)]
pub struct MeshSummary {
    pub vertices: usize,
    pub cells: usize,
    pub faces: usize,
    pub interior_faces: usize,
    pub boundary_faces: usize,
    pub h_max: f64,
    pub min_cell_area: f64,
}

impl MeshSummary {
    pub fn of(mesh: &CoarseMesh) -> Self {
        let interior = mesh.n_interior_faces();
        MeshSummary {
            vertices: mesh.vertices.len(),
            cells: mesh.cells.len(),
            faces: mesh.faces.len(),
            interior_faces: interior,
            boundary_faces: mesh.faces.len() - interior,
            h_max: mesh.h_max(),
            min_cell_area: mesh.cells.iter().map(|c| c.area).fold(f64::INFINITY, f64::min),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    #[test]
    fn single_square_matches_structured() {
        let text = "v 0 0\nv 1 0\nv 1 1\nv 0 1\nc 0 1 2 3\n";
        let parsed = parse_mesh(text).unwrap();
        let built = CoarseMesh::structured(1, 1, Rect::UNIT).unwrap();
        assert_eq!(parsed.cells.len(), built.cells.len());
        assert_eq!(parsed.faces.len(), built.faces.len());
        assert!((parsed.cells[0].area - built.cells[0].area).abs() < 1e-15);
        assert!((parsed.cells[0].centroid - built.cells[0].centroid).norm() < 1e-15);
    }

    #[test]
    fn two_triangles() {
        let text = "v 0 0\nv 1 0\nv 1 1\nv 0 1\nc 0 1 2\nc 0 2 3\n";
        let m = parse_mesh(text).unwrap();
        assert_eq!(m.cells.len(), 2);
        assert_eq!(m.n_interior_faces(), 1);
    }

    #[test]
    fn format_round_trip() {
        let m = CoarseMesh::structured(3, 2, Rect::UNIT).unwrap();
        let m2 = parse_mesh(&format_mesh(&m)).unwrap();
        assert_eq!(m.cells.len(), m2.cells.len());
        assert_eq!(m.faces.len(), m2.faces.len());
        for (a, b) in m.vertices.iter().zip(&m2.vertices) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn parse_errors_are_reported() {
        assert!(matches!(parse_mesh("v 0\n"), Err(MeshError::Parse { line: 1, .. })));
        assert!(matches!(parse_mesh("q 1 2\n"), Err(MeshError::Parse { .. })));
    }
}
