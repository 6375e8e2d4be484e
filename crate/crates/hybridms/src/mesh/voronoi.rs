//! Clipped Voronoi diagrams as polygonal meshes.
//!
//! Each Voronoi cell is obtained by clipping the bounding rectangle against
//! the bisector half-plane of every other seed (Sutherland-Hodgman). Vertices
//! shared by neighboring cells are computed independently per cell and then
//! snapped to a single vertex id, which is what the mesh constructor needs to
//! recognize shared faces.

use super::coarse::{CoarseMesh, MeshError, Rect};
use super::Point;

/// Voronoi mesh of `seeds` clipped to `domain`.
pub fn voronoi_mesh(seeds: &[Point], domain: Rect) -> Result<CoarseMesh, MeshError> {
    if seeds.len() < 2 {
        return Err(MeshError::DegenerateDomain("need at least 2 seeds".into()));
    }
    let diag = (domain.width().powi(2) + domain.height().powi(2)).sqrt();
    let snap_tol = 1e-9 * diag;

    let mut vertices: Vec<Point> = Vec::new();
    let mut polygons: Vec<Vec<usize>> = Vec::new();
    for (i, &si) in seeds.iter().enumerate() {
        let mut poly = vec![
            Point::new(domain.x0, domain.y0),
            Point::new(domain.x1, domain.y0),
            Point::new(domain.x1, domain.y1),
            Point::new(domain.x0, domain.y1),
        ];
        for (j, &sj) in seeds.iter().enumerate() {
            if i == j {
                continue;
            }
            poly = clip_halfplane(&poly, si, sj);
            if poly.len() < 3 {
                return Err(MeshError::DegenerateDomain(format!(
                    "seed {i} produces an empty Voronoi cell (coincident seeds?)"
                )));
            }
        }
        let mut loop_ = Vec::with_capacity(poly.len());
        for p in poly {
            let id = match vertices.iter().position(|v| (v - p).norm() <= snap_tol) {
                Some(id) => id,
                None => {
                    vertices.push(p);
                    vertices.len() - 1
                }
            };
            if loop_.last() != Some(&id) {
                loop_.push(id);
            }
        }
        while loop_.len() > 1 && loop_.first() == loop_.last() {
            loop_.pop();
        }
        polygons.push(loop_);
    }
    CoarseMesh::from_polygons(vertices, polygons)
}

/// Keep the part of `poly` closer to `si` than to `sj`.
fn clip_halfplane(poly: &[Point], si: Point, sj: Point) -> Vec<Point> {
    let mid = 0.5 * (si + sj);
    let dir = sj - si;
    let side = |p: Point| (p - mid).dot(&dir); // <= 0 means kept
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let (sp, sq) = (side(p), side(q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push(p + t * (q - p));
        }
    }
    out
}

/// Ten fixed, well-separated seeds in the unit square. Used by tests and as a
/// reproducible sample input for `voronoi_mesh`.
pub const SAMPLE_SEEDS_10: [[f64; 2]; 10] = [
    [0.137, 0.208],
    [0.521, 0.113],
    [0.873, 0.241],
    [0.158, 0.611],
    [0.452, 0.447],
    [0.784, 0.528],
    [0.302, 0.879],
    [0.631, 0.764],
    [0.921, 0.842],
    [0.049, 0.936],
];

/// The 10-seed sample Voronoi mesh of the unit square.
pub fn sample_voronoi_10() -> CoarseMesh {
    let seeds: Vec<Point> = SAMPLE_SEEDS_10.iter().map(|&[x, y]| Point::new(x, y)).collect();
    voronoi_mesh(&seeds, Rect::UNIT).expect("sample seeds yield a valid mesh")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::io::{format_mesh, parse_mesh};

    #[test]
    fn sample_mesh_is_valid_and_tiles_square() {
        let m = sample_voronoi_10();
        assert_eq!(m.cells.len(), 10);
        let total: f64 = m.cells.iter().map(|c| c.area).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Connected planar subdivision of a disk-like domain:
        // V - E + C = 1.
        let v = m.vertices.len() as i64;
        let e = m.faces.len() as i64;
        let c = m.cells.len() as i64;
        assert_eq!(v - e + c, 1);
    }

    #[test]
    fn sample_mesh_survives_text_round_trip() {
        let m = sample_voronoi_10();
        let text = format_mesh(&m);
        let m2 = parse_mesh(&text).unwrap();
        assert_eq!(m.faces.len(), m2.faces.len());
        assert_eq!(m.n_interior_faces(), m2.n_interior_faces());
    }

    #[test]
    fn seeds_are_inside_their_cells() {
        let m = sample_voronoi_10();
        for (i, &[x, y]) in SAMPLE_SEEDS_10.iter().enumerate() {
            let s = Point::new(x, y);
            // The seed must see every edge of its (convex) cell from inside.
            let cell = &m.cells[i];
            for (&f, &sg) in cell.faces.iter().zip(&cell.signs) {
                let face = &m.faces[f];
                assert!(sg * (s - face.midpoint).dot(&face.normal) < 0.0);
            }
        }
    }
}
