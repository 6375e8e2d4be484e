use std::collections::HashMap;

use super::coarse::{CoarseMesh, MeshError};
use super::{signed_area, Point};

/// Conforming simplicial submesh of a coarse polygonal mesh.
///
/// Every polygon is fan-triangulated from its centroid and each fan triangle
/// refined `r` times by uniform 4-splitting, so a cell with p vertices holds
/// p * 4^r triangles and every coarse face carries 2^r subedges. Nodes on a
/// coarse face are created once, from the face's own endpoints, and referenced
/// from both adjacent cells; the global triangulation is therefore conforming
/// with bitwise-identical interface nodes.
#[derive(Debug, Clone)]
pub struct FineMesh {
    pub nodes: Vec<Point>,
    /// Counter-clockwise triangles as global node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Triangle indices owned by each coarse cell.
    pub cell_triangles: Vec<Vec<usize>>,
    /// Fine nodes along each coarse face, ordered from endpoint `a` to `b`
    /// (endpoints included); length 2^r + 1.
    pub face_nodes: Vec<Vec<usize>>,
    /// Sorted global ids of fine nodes on the domain boundary.
    pub boundary_nodes: Vec<usize>,
    pub refinement: u32,
}

impl FineMesh {
    pub fn build(coarse: &CoarseMesh, r: u32) -> Result<Self, MeshError> {
        let n = 1usize << r;
        let nf = n as f64;
        let mut nodes = coarse.vertices.clone();

        // Subdivision nodes of each coarse face, generated once.
        let mut face_nodes = Vec::with_capacity(coarse.faces.len());
        for face in &coarse.faces {
            let pa = coarse.vertices[face.a];
            let pb = coarse.vertices[face.b];
            let mut ids = Vec::with_capacity(n + 1);
            ids.push(face.a);
            for l in 1..n {
                ids.push(nodes.len());
                nodes.push(pa + (l as f64 / nf) * (pb - pa));
            }
            ids.push(face.b);
            face_nodes.push(ids);
        }

        let mut triangles = Vec::new();
        let mut cell_triangles = Vec::with_capacity(coarse.cells.len());
        for (ci, cell) in coarse.cells.iter().enumerate() {
            let p = cell.vertices.len();
            let c = cell.centroid;
            for li in 0..p {
                let vi = coarse.vertices[cell.vertices[li]];
                let vj = coarse.vertices[cell.vertices[(li + 1) % p]];
                if signed_area(c, vi, vj) <= 0.0 {
                    return Err(MeshError::NotStarShaped { cell: ci });
                }
            }
            let centroid_id = nodes.len();
            nodes.push(c);
            // Spoke nodes from the centroid toward each polygon vertex,
            // shared between the two fans meeting at that vertex.
            let mut spokes: Vec<Vec<usize>> = Vec::with_capacity(p);
            for &v in &cell.vertices {
                let pv = coarse.vertices[v];
                let mut ids = Vec::with_capacity(n.saturating_sub(1));
                for t in 1..n {
                    ids.push(nodes.len());
                    nodes.push(c + (t as f64 / nf) * (pv - c));
                }
                spokes.push(ids);
            }

            let mut tris = Vec::with_capacity(p * n * n);
            for li in 0..p {
                let lj = (li + 1) % p;
                let fid = cell.faces[li];
                let forward = coarse.faces[fid].a == cell.vertices[li];
                let a_pt = c;
                let b_pt = coarse.vertices[cell.vertices[li]];
                let c_pt = coarse.vertices[cell.vertices[lj]];
                // Lattice node ids for the fan triangle (centroid, v_i, v_j);
                // (a, b) has a + b <= n, P = A + a/n (B-A) + b/n (C-A).
                let mut id = HashMap::new();
                for a in 0..=n {
                    for b in 0..=(n - a) {
                        let node = if a == 0 && b == 0 {
                            centroid_id
                        } else if a + b == n {
                            // On the coarse face; parameter from v_i is b/n.
                            let l = if forward { b } else { n - b };
                            face_nodes[fid][l]
                        } else if b == 0 {
                            spokes[li][a - 1]
                        } else if a == 0 {
                            spokes[lj][b - 1]
                        } else {
                            let fresh = nodes.len();
                            nodes.push(
                                a_pt + (a as f64 / nf) * (b_pt - a_pt)
                                    + (b as f64 / nf) * (c_pt - a_pt),
                            );
                            fresh
                        };
                        id.insert((a, b), node);
                    }
                }
                for a in 0..n {
                    for b in 0..(n - a) {
                        tris.push([id[&(a, b)], id[&(a + 1, b)], id[&(a, b + 1)]]);
                        if a + b < n - 1 {
                            tris.push([id[&(a + 1, b)], id[&(a + 1, b + 1)], id[&(a, b + 1)]]);
                        }
                    }
                }
            }
            let first = triangles.len();
            triangles.extend(tris.iter().copied());
            cell_triangles.push((first..triangles.len()).collect());
        }

        let mut boundary_nodes: Vec<usize> = coarse
            .faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_boundary())
            .flat_map(|(fi, _)| face_nodes[fi].iter().copied())
            .collect();
        boundary_nodes.sort_unstable();
        boundary_nodes.dedup();

        let fine = FineMesh {
            nodes,
            triangles,
            cell_triangles,
            face_nodes,
            boundary_nodes,
            refinement: r,
        };
        fine.validate(coarse)?;
        Ok(fine)
    }

    fn validate(&self, coarse: &CoarseMesh) -> Result<(), MeshError> {
        for (ci, tris) in self.cell_triangles.iter().enumerate() {
            let mut area = 0.0;
            for &t in tris {
                let [a, b, c] = self.triangles[t];
                let s = signed_area(self.nodes[a], self.nodes[b], self.nodes[c]);
                if s <= 0.0 {
                    return Err(MeshError::BadPolygon {
                        cell: ci,
                        reason: format!("fine triangle {t} has signed area {s:.3e}"),
                    });
                }
                area += s;
            }
            let exact = coarse.cells[ci].area;
            if (area - exact).abs() > 1e-12 * exact {
                return Err(MeshError::BadPolygon {
                    cell: ci,
                    reason: format!("fine triangles tile {area:.16e} of cell area {exact:.16e}"),
                });
            }
        }
        Ok(())
    }

    pub fn area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.triangles[tri];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    /// Centroid of a fine triangle (the sampling point for the diffusion
    /// coefficient).
    pub fn centroid(&self, tri: usize) -> Point {
        let [a, b, c] = self.triangles[tri];
        (self.nodes[a] + self.nodes[b] + self.nodes[c]) / 3.0
    }

    /// Per-cell views with local node numbering.
    pub fn patches(&self, coarse: &CoarseMesh) -> Vec<CellPatch> {
        (0..coarse.cells.len())
            .map(|ci| CellPatch::build(self, coarse, ci))
            .collect()
    }

    /// The patch of a single cell.
    pub fn patch(&self, coarse: &CoarseMesh, cell: usize) -> CellPatch {
        CellPatch::build(self, coarse, cell)
    }
}

/// A coarse cell's share of the fine mesh with contiguous local numbering.
#[derive(Debug, Clone)]
pub struct CellPatch {
    pub cell: usize,
    /// Global node ids, sorted ascending; local id = position.
    pub node_ids: Vec<usize>,
    pub coords: Vec<Point>,
    /// Local-index triangles, CCW.
    pub triangles: Vec<[usize; 3]>,
    /// Global indices (into `FineMesh::triangles`) aligned with `triangles`.
    pub triangle_ids: Vec<usize>,
    /// Local node ids along each face of the cell (cell face order, trace
    /// direction from face endpoint `a` to `b`).
    pub face_nodes: Vec<Vec<usize>>,
}

impl CellPatch {
    fn build(fine: &FineMesh, coarse: &CoarseMesh, ci: usize) -> Self {
        let tri_ids = &fine.cell_triangles[ci];
        let mut node_ids: Vec<usize> = tri_ids
            .iter()
            .flat_map(|&t| fine.triangles[t].iter().copied())
            .collect();
        node_ids.sort_unstable();
        node_ids.dedup();
        let local = |g: usize| node_ids.binary_search(&g).expect("node in patch");
        let triangles = tri_ids
            .iter()
            .map(|&t| fine.triangles[t].map(local))
            .collect();
        let coords = node_ids.iter().map(|&g| fine.nodes[g]).collect();
        let face_nodes = coarse.cells[ci]
            .faces
            .iter()
            .map(|&f| fine.face_nodes[f].iter().map(|&g| local(g)).collect())
            .collect();
        CellPatch {
            cell: ci,
            node_ids,
            coords,
            triangles,
            triangle_ids: tri_ids.clone(),
            face_nodes,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    /// Area and constant P1 basis gradients of a local triangle.
    pub fn triangle_grads(&self, t: usize) -> (f64, [Point; 3]) {
        let [a, b, c] = self.triangles[t];
        triangle_grads(self.coords[a], self.coords[b], self.coords[c])
    }

    pub fn triangle_centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        (self.coords[a] + self.coords[b] + self.coords[c]) / 3.0
    }
}

/// Area and P1 shape-function gradients of the triangle (a, b, c).
pub fn triangle_grads(a: Point, b: Point, c: Point) -> (f64, [Point; 3]) {
    let area = signed_area(a, b, c);
    let f = 1.0 / (2.0 * area);
    (
        area,
        [
            Point::new(b.y - c.y, c.x - b.x) * f,
            Point::new(c.y - a.y, a.x - c.x) * f,
            Point::new(a.y - b.y, b.x - a.x) * f,
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    #[test]
    fn unit_cell_counts() {
        let coarse = CoarseMesh::structured(1, 1, Rect::UNIT).unwrap();
        let fine = FineMesh::build(&coarse, 0).unwrap();
        assert_eq!(fine.triangles.len(), 4);
        for fnodes in &fine.face_nodes {
            assert_eq!(fnodes.len(), 2); // one subedge per face
        }

        let fine = FineMesh::build(&coarse, 2).unwrap();
        assert_eq!(fine.triangles.len(), 4 * 16);
        for fnodes in &fine.face_nodes {
            assert_eq!(fnodes.len(), 5); // 4 subedges per face
        }
    }

    #[test]
    fn tiles_domain_area() {
        let coarse = CoarseMesh::structured(3, 2, Rect { x0: 0.0, y0: 0.0, x1: 2.0, y1: 1.5 }).unwrap();
        for r in 0..3 {
            let fine = FineMesh::build(&coarse, r).unwrap();
            let total: f64 = (0..fine.triangles.len()).map(|t| fine.area(t)).sum();
            assert!((total - 3.0).abs() <= 1e-13 * 3.0);
        }
    }

    #[test]
    fn interface_subedges_are_shared_nodes() {
        let coarse = CoarseMesh::structured(2, 2, Rect::UNIT).unwrap();
        let fine = FineMesh::build(&coarse, 3).unwrap();
        let patches = fine.patches(&coarse);
        for fi in coarse.interior_faces() {
            let face = &coarse.faces[fi];
            let (ka, kb) = (face.cells.0, face.cells.1.unwrap());
            for patch in [&patches[ka], &patches[kb]] {
                let pos = coarse.cells[patch.cell].faces.iter().position(|&f| f == fi).unwrap();
                let globals: Vec<usize> = patch.face_nodes[pos]
                    .iter()
                    .map(|&l| patch.node_ids[l])
                    .collect();
                // Same global node ids from both sides, in the same order.
                assert_eq!(globals, fine.face_nodes[fi]);
            }
        }
    }

    #[test]
    fn rejects_non_star_shaped() {
        // A "C" shaped hexagon whose centroid sees the notch edges from outside.
        let verts = vec![
            Point::new(0.0, 0.0),
            Point::new(4.0, 0.0),
            Point::new(4.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 4.0),
            Point::new(4.0, 4.0),
            Point::new(4.0, 5.0),
            Point::new(0.0, 5.0),
        ];
        let coarse = CoarseMesh::from_polygons(verts, vec![(0..8).collect()]).unwrap();
        assert!(matches!(
            FineMesh::build(&coarse, 1),
            Err(MeshError::NotStarShaped { .. })
        ));
    }

    #[test]
    fn patch_grads_sum_to_zero() {
        let coarse = CoarseMesh::structured(2, 1, Rect::UNIT).unwrap();
        let fine = FineMesh::build(&coarse, 1).unwrap();
        let patches = fine.patches(&coarse);
        for p in &patches {
            for t in 0..p.triangles.len() {
                let (area, g) = p.triangle_grads(t);
                assert!(area > 0.0);
                let s = g[0] + g[1] + g[2];
                assert!(s.norm() < 1e-12);
            }
        }
    }
}
