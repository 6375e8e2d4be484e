use std::collections::BTreeMap;

use super::Point;

/// Errors raised while building or validating a coarse mesh.
#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("mesh has no cells")]
    Empty,
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("cell {cell}: {reason}")]
    BadPolygon { cell: usize, reason: String },
    #[error("cell {cell} is clockwise; all cells must be counter-clockwise")]
    ClockwiseCell { cell: usize },
    #[error("edge ({a}, {b}) is traversed twice in the same direction (overlapping or misoriented cells)")]
    InconsistentEdge { a: usize, b: usize },
    #[error("edge ({a}, {b}) is shared by more than two cells")]
    OverusedEdge { a: usize, b: usize },
    #[error("boundary is not a single closed loop ({0}); the cells do not tile a simply connected domain")]
    BrokenBoundary(String),
    #[error("cell {cell} is not star-shaped with respect to its centroid; fan triangulation would fold")]
    NotStarShaped { cell: usize },
    #[error("vertex index {index} out of range (mesh has {count} vertices)")]
    VertexOutOfRange { index: usize, count: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned rectangle, used as the computational domain for structured
/// meshes and Voronoi clipping.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// An oriented straight mesh face (a segment between two coarse vertices).
#[derive(Debug, Clone)]
pub struct Face {
    /// Endpoint vertex indices; the arclength coordinate runs from `a` to `b`.
    pub a: usize,
    pub b: usize,
    /// Unit normal, fixed once per face. For a boundary face it is the outward
    /// normal of the domain; for an interface it points out of the
    /// lower-indexed adjacent cell.
    pub normal: Point,
    /// Adjacent cells: `(k, None)` for a boundary face, `(k_lo, Some(k_hi))`
    /// with `k_lo < k_hi` for an interface.
    pub cells: (usize, Option<usize>),
    pub length: f64,
    pub midpoint: Point,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }

    /// Cells adjacent to this face, one or two entries.
    pub fn adjacent(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.cells.0).chain(self.cells.1)
    }
}

/// A polygonal coarse cell.
#[derive(Debug, Clone)]
pub struct Cell {
    /// Vertex loop, counter-clockwise.
    pub vertices: Vec<usize>,
    /// Faces in loop order: `faces[i]` joins `vertices[i]` to `vertices[i+1]`.
    pub faces: Vec<usize>,
    /// Orientation signs n_{K,F} . n_F in {+1, -1}, aligned with `faces`.
    pub signs: Vec<f64>,
    pub centroid: Point,
    pub area: f64,
    pub diameter: f64,
}

/// A polygonal partition of a 2D domain with oriented faces and adjacency.
#[derive(Debug, Clone)]
pub struct CoarseMesh {
    pub vertices: Vec<Point>,
    pub cells: Vec<Cell>,
    pub faces: Vec<Face>,
}

impl CoarseMesh {
    /// Build a mesh from raw polygons (counter-clockwise vertex loops).
    ///
    /// Faces are deduplicated through shared vertex index pairs. Rejects
    /// clockwise or self-intersecting polygons, edges used by more than two
    /// cells or twice in the same direction, and cell sets whose boundary is
    /// not a single closed loop.
    pub fn from_polygons(vertices: Vec<Point>, polygons: Vec<Vec<usize>>) -> Result<Self, MeshError> {
        if polygons.is_empty() {
            return Err(MeshError::Empty);
        }
        for loop_ in &polygons {
            for &v in loop_ {
                if v >= vertices.len() {
                    return Err(MeshError::VertexOutOfRange {
                        index: v,
                        count: vertices.len(),
                    });
                }
            }
        }
        for (ci, loop_) in polygons.iter().enumerate() {
            validate_polygon(ci, loop_, &vertices)?;
        }

        // First pass: collect undirected edges with the traversal direction of
        // each incident cell.
        let mut edge_use: BTreeMap<(usize, usize), Vec<(usize, bool)>> = BTreeMap::new();
        for (ci, loop_) in polygons.iter().enumerate() {
            for i in 0..loop_.len() {
                let a = loop_[i];
                let b = loop_[(i + 1) % loop_.len()];
                let key = (a.min(b), a.max(b));
                edge_use.entry(key).or_default().push((ci, a < b));
            }
        }
        for (&(a, b), users) in &edge_use {
            match users.as_slice() {
                [_] => {}
                [(_, d0), (_, d1)] => {
                    if d0 == d1 {
                        return Err(MeshError::InconsistentEdge { a, b });
                    }
                }
                _ => return Err(MeshError::OverusedEdge { a, b }),
            }
        }

        // Second pass: create faces in a deterministic order (cells in index
        // order, edges in loop order), oriented by the first cell seen.
        let mut face_of_edge: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut faces: Vec<Face> = Vec::new();
        for (ci, loop_) in polygons.iter().enumerate() {
            for i in 0..loop_.len() {
                let a = loop_[i];
                let b = loop_[(i + 1) % loop_.len()];
                let key = (a.min(b), a.max(b));
                match face_of_edge.get(&key) {
                    None => {
                        let pa = vertices[a];
                        let pb = vertices[b];
                        let d = pb - pa;
                        let length = d.norm();
                        // Outward normal of a CCW polygon along the edge a->b.
                        let normal = Point::new(d.y, -d.x) / length;
                        face_of_edge.insert(key, faces.len());
                        faces.push(Face {
                            a,
                            b,
                            normal,
                            cells: (ci, None),
                            length,
                            midpoint: 0.5 * (pa + pb),
                        });
                    }
                    Some(&fi) => {
                        faces[fi].cells.1 = Some(ci);
                    }
                }
            }
        }

        check_single_boundary_loop(&faces)?;

        let mut cells = Vec::with_capacity(polygons.len());
        for (ci, loop_) in polygons.iter().enumerate() {
            let pts: Vec<Point> = loop_.iter().map(|&v| vertices[v]).collect();
            let (area, centroid) = polygon_area_centroid(&pts);
            let mut diameter: f64 = 0.0;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    diameter = diameter.max((pts[i] - pts[j]).norm());
                }
            }
            let mut cell_faces = Vec::with_capacity(loop_.len());
            let mut signs = Vec::with_capacity(loop_.len());
            for i in 0..loop_.len() {
                let a = loop_[i];
                let b = loop_[(i + 1) % loop_.len()];
                let fi = face_of_edge[&(a.min(b), a.max(b))];
                cell_faces.push(fi);
                signs.push(if faces[fi].a == a { 1.0 } else { -1.0 });
            }
            cells.push(Cell {
                vertices: loop_.clone(),
                faces: cell_faces,
                signs,
                centroid,
                area,
                diameter,
            });
            // Polygon closure: sum_F |F| sign n_F must vanish.
            let mut closure = Point::zeros();
            let cell = cells.last().unwrap();
            for (&fi, &s) in cell.faces.iter().zip(&cell.signs) {
                closure += faces[fi].length * s * faces[fi].normal;
            }
            if closure.norm() > 1e-13 * cell.diameter.max(1.0) {
                return Err(MeshError::BadPolygon {
                    cell: ci,
                    reason: format!("face closure defect {:.3e}", closure.norm()),
                });
            }
        }

        Ok(CoarseMesh {
            vertices,
            cells,
            faces,
        })
    }

    /// Structured nx-by-ny quadrilateral mesh of an axis-aligned rectangle.
    pub fn structured(nx: usize, ny: usize, domain: Rect) -> Result<Self, MeshError> {
        if nx < 1 || ny < 1 {
            return Err(MeshError::Empty);
        }
        if domain.width() <= 0.0 || domain.height() <= 0.0 {
            return Err(MeshError::DegenerateDomain(format!(
                "rectangle has width {} and height {}",
                domain.width(),
                domain.height()
            )));
        }
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Point::new(
                    domain.x0 + domain.width() * (i as f64 / nx as f64),
                    domain.y0 + domain.height() * (j as f64 / ny as f64),
                ));
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut polygons = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                polygons.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            }
        }
        Self::from_polygons(vertices, polygons)
    }

    /// Largest cell diameter.
    pub fn h_max(&self) -> f64 {
        self.cells.iter().map(|c| c.diameter).fold(0.0, f64::max)
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(|&f| !self.faces[f].is_boundary())
    }

    pub fn n_interior_faces(&self) -> usize {
        self.interior_faces().count()
    }

    /// Orientation sign of `cell` on `face` (n_{K,F} . n_F).
    pub fn sign(&self, cell: usize, face: usize) -> f64 {
        let c = &self.cells[cell];
        let pos = c.faces.iter().position(|&f| f == face).expect("face not on cell");
        c.signs[pos]
    }
}

fn validate_polygon(ci: usize, loop_: &[usize], vertices: &[Point]) -> Result<(), MeshError> {
    if loop_.len() < 3 {
        return Err(MeshError::BadPolygon {
            cell: ci,
            reason: "fewer than 3 vertices".into(),
        });
    }
    let mut sorted = loop_.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != loop_.len() {
        return Err(MeshError::BadPolygon {
            cell: ci,
            reason: "repeated vertex in loop".into(),
        });
    }
    let pts: Vec<Point> = loop_.iter().map(|&v| vertices[v]).collect();
    let (area, _) = polygon_area_centroid(&pts);
    if area <= 0.0 {
        return Err(MeshError::ClockwiseCell { cell: ci });
    }
    // Simplicity: no two non-adjacent edges intersect.
    let p = pts.len();
    for i in 0..p {
        for j in i + 1..p {
            if j == i || (j + 1) % p == i || (i + 1) % p == j {
                continue;
            }
            if segments_intersect(pts[i], pts[(i + 1) % p], pts[j], pts[(j + 1) % p]) {
                return Err(MeshError::BadPolygon {
                    cell: ci,
                    reason: format!("edges {i} and {j} intersect"),
                });
            }
        }
    }
    Ok(())
}

fn check_single_boundary_loop(faces: &[Face]) -> Result<(), MeshError> {
    let boundary: Vec<&Face> = faces.iter().filter(|f| f.is_boundary()).collect();
    if boundary.is_empty() {
        return Err(MeshError::BrokenBoundary("no boundary faces".into()));
    }
    let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
    for f in &boundary {
        *degree.entry(f.a).or_default() += 1;
        *degree.entry(f.b).or_default() += 1;
    }
    if let Some((&v, &d)) = degree.iter().find(|(_, &d)| d != 2) {
        return Err(MeshError::BrokenBoundary(format!(
            "boundary vertex {v} has degree {d}"
        )));
    }
    // Walk one loop; it must visit every boundary edge.
    let mut next: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, f) in boundary.iter().enumerate() {
        next.entry(f.a).or_default().push(i);
        next.entry(f.b).or_default().push(i);
    }
    let mut visited = vec![false; boundary.len()];
    let mut at = boundary[0].a;
    loop {
        let Some(&ei) = next[&at].iter().find(|&&e| !visited[e]) else {
            break;
        };
        visited[ei] = true;
        at = if boundary[ei].a == at { boundary[ei].b } else { boundary[ei].a };
    }
    if visited.iter().any(|&v| !v) {
        return Err(MeshError::BrokenBoundary(
            "boundary splits into several loops (interior gap?)".into(),
        ));
    }
    Ok(())
}

/// Shoelace area and centroid of a simple polygon.
pub fn polygon_area_centroid(pts: &[Point]) -> (f64, Point) {
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..pts.len() {
        let p = pts[i];
        let q = pts[(i + 1) % pts.len()];
        let cross = p.x * q.y - q.x * p.y;
        area2 += cross;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    let area = 0.5 * area2;
    (area, Point::new(cx / (3.0 * area2), cy / (3.0 * area2)))
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}
