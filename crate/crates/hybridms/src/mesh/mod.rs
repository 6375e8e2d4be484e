//! Polygonal coarse meshes and their conforming triangular submeshes.
//!
//! The coarse mesh carries the skeletal data every method assembles against:
//! oriented faces with a single global normal, cell/face adjacency and the
//! per-cell orientation signs. The fine mesh is produced by fan-triangulating
//! each polygon from its centroid and refining uniformly; the subdivision
//! points of every coarse face are generated once per face, so the two cells
//! sharing an interface reference bitwise-identical fine nodes and the global
//! triangulation is conforming by construction.

mod coarse;
mod fine;
pub mod io;
pub mod voronoi;

pub use coarse::{Cell, CoarseMesh, Face, MeshError, Rect};
pub use fine::{triangle_grads, CellPatch, FineMesh};

/// 2D point/vector.
pub type Point = nalgebra::Vector2<f64>;

/// Signed area of the triangle (a, b, c); positive when counter-clockwise.
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}
