//! Global conforming fine P1 reference solve and prolongation between
//! refinement levels.

use nalgebra::DVector;

use crate::field::SolutionField;
use crate::mesh::{CoarseMesh, FineMesh, Point};
use crate::problem::{CoeffSpec, SourceTerm};
use crate::quad::TriangleRule;
use crate::sparse::{pcg, Csr, PcgResult};

/// Reference solution on the global fine mesh (all nodes; boundary rows are
/// zero by the homogeneous Dirichlet condition).
pub struct FineReference {
    pub values: DVector<f64>,
    pub pcg: PcgResult,
}

/// Solve the global fine P1 Dirichlet problem with the coefficient sampled
/// at triangle centroids. This is the measurement reference of the
/// convergence harness: the same fine resolution the local bases use, so the
/// comparison isolates the coarse-scale error.
pub fn solve_reference(
    mesh: &CoarseMesh,
    fine: &FineMesh,
    coeff: &CoeffSpec,
    source: &SourceTerm,
) -> FineReference {
    assert_eq!(fine.cell_triangles.len(), mesh.cells.len());
    let n_all = fine.nodes.len();
    let mut interior = vec![usize::MAX; n_all];
    let mut count = 0usize;
    {
        let mut is_boundary = vec![false; n_all];
        for &b in &fine.boundary_nodes {
            is_boundary[b] = true;
        }
        for (i, item) in interior.iter_mut().enumerate() {
            if !is_boundary[i] {
                *item = count;
                count += 1;
            }
        }
    }

    let rule = TriangleRule::with_degree(8);
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = DVector::zeros(count);
    for (ci, tris) in fine.cell_triangles.iter().enumerate() {
        for &t in tris {
            let [a, b, c] = fine.triangles[t];
            let (pa, pb, pc) = (fine.nodes[a], fine.nodes[b], fine.nodes[c]);
            let (area, grads) = crate::mesh::triangle_grads(pa, pb, pc);
            let amat = coeff.tensor_at(fine.centroid(t));
            let nodes = [a, b, c];
            for i in 0..3 {
                let gi = interior[nodes[i]];
                if gi == usize::MAX {
                    continue;
                }
                let agi = amat * grads[i];
                for j in 0..3 {
                    let gj = interior[nodes[j]];
                    if gj == usize::MAX {
                        continue;
                    }
                    triplets.push((gi, gj, area * agi.dot(&grads[j])));
                }
            }
            let det = 2.0 * area;
            for (&(u, v), &w) in rule.points.iter().zip(&rule.weights) {
                let p = pa + (pb - pa) * u + (pc - pa) * v;
                let fv = source.value(ci, p);
                let shapes = [1.0 - u - v, u, v];
                for i in 0..3 {
                    let gi = interior[nodes[i]];
                    if gi != usize::MAX {
                        rhs[gi] += det * w * fv * shapes[i];
                    }
                }
            }
        }
    }
    let a = Csr::from_triplets(count, triplets);
    let (x, res) = pcg(&a, &rhs, 1e-12, 100_000);
    let mut values = DVector::zeros(n_all);
    for (i, &gi) in interior.iter().enumerate() {
        if gi != usize::MAX {
            values[i] = x[gi];
        }
    }
    FineReference { values, pcg: res }
}

impl FineReference {
    pub fn as_field(&self, mesh: &CoarseMesh, fine: &FineMesh) -> SolutionField {
        SolutionField::from_global(&self.values, &fine.patches(mesh), "fine-reference")
    }
}

/// Interpolate a per-cell field from one refinement level onto a finer one of
/// the same coarse mesh (P1 interpolation through point location).
pub fn prolong(
    mesh: &CoarseMesh,
    fine_from: &FineMesh,
    field: &SolutionField,
    fine_to: &FineMesh,
) -> SolutionField {
    let mut per_cell = Vec::with_capacity(mesh.cells.len());
    for ci in 0..mesh.cells.len() {
        let from = fine_from.patch(mesh, ci);
        let to = fine_to.patch(mesh, ci);
        let vals = &field.per_cell[ci];
        let locator = Locator::new(&from);
        let out = DVector::from_fn(to.n_nodes(), |i, _| {
            let p = to.coords[i];
            let (t, bary) = locator.locate(&from, p);
            let nodes = from.triangles[t];
            bary[0] * vals[nodes[0]] + bary[1] * vals[nodes[1]] + bary[2] * vals[nodes[2]]
        });
        per_cell.push(out);
    }
    SolutionField {
        per_cell,
        method: format!("{}-prolonged", field.method),
        space_hash: field.space_hash,
    }
}

/// Uniform-bucket point locator over the triangles of one patch.
struct Locator {
    min: Point,
    inv_cell: f64,
    dims: (usize, usize),
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    fn new(patch: &crate::mesh::CellPatch) -> Self {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &patch.coords {
            min = min.inf(p);
            max = max.sup(p);
        }
        let ntri = patch.triangles.len().max(1);
        let per_axis = ((ntri as f64).sqrt().ceil() as usize).clamp(1, 128);
        let span = (max.x - min.x).max(max.y - min.y).max(1e-300);
        let inv_cell = per_axis as f64 / span;
        let dims = (per_axis, per_axis);
        let mut buckets = vec![Vec::new(); per_axis * per_axis];
        for (t, tri) in patch.triangles.iter().enumerate() {
            let (mut bmin, mut bmax) = (
                Point::new(f64::INFINITY, f64::INFINITY),
                Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
            );
            for &n in tri {
                bmin = bmin.inf(&patch.coords[n]);
                bmax = bmax.sup(&patch.coords[n]);
            }
            let (i0, j0) = bucket_of(bmin, min, inv_cell, dims);
            let (i1, j1) = bucket_of(bmax, min, inv_cell, dims);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    buckets[j * dims.0 + i].push(t);
                }
            }
        }
        Locator {
            min,
            inv_cell,
            dims,
            buckets,
        }
    }

    fn locate(&self, patch: &crate::mesh::CellPatch, p: Point) -> (usize, [f64; 3]) {
        let (i, j) = bucket_of(p, self.min, self.inv_cell, self.dims);
        for &t in &self.buckets[j * self.dims.0 + i] {
            if let Some(b) = barycentric(patch, t, p, 1e-10) {
                return (t, b);
            }
        }
        // Roundoff near bucket borders: fall back to a full scan with a
        // looser tolerance.
        let mut best = (0usize, [0.0; 3], f64::INFINITY);
        for t in 0..patch.triangles.len() {
            if let Some(b) = barycentric(patch, t, p, 1e-6) {
                let defect = -b[0].min(b[1]).min(b[2]).min(0.0);
                if defect < best.2 {
                    best = (t, b, defect);
                }
                if defect == 0.0 {
                    break;
                }
            }
        }
        assert!(best.2.is_finite(), "point {p:?} not found in patch");
        (best.0, best.1)
    }
}

fn bucket_of(p: Point, min: Point, inv_cell: f64, dims: (usize, usize)) -> (usize, usize) {
    let i = (((p.x - min.x) * inv_cell).floor() as isize).clamp(0, dims.0 as isize - 1) as usize;
    let j = (((p.y - min.y) * inv_cell).floor() as isize).clamp(0, dims.1 as isize - 1) as usize;
    (i, j)
}

fn barycentric(
    patch: &crate::mesh::CellPatch,
    t: usize,
    p: Point,
    tol: f64,
) -> Option<[f64; 3]> {
    let [a, b, c] = patch.triangles[t];
    let (pa, pb, pc) = (patch.coords[a], patch.coords[b], patch.coords[c]);
    let det = (pb - pa).perp(&(pc - pa));
    let u = (p - pa).perp(&(pc - pa)) / det;
    let v = (pb - pa).perp(&(p - pa)) / det;
    let w = 1.0 - u - v;
    if u >= -tol && v >= -tol && w >= -tol {
        Some([w, u, v])
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    #[test]
    fn reference_reproduces_manufactured_solution() {
        let mesh = CoarseMesh::structured(4, 4, Rect::UNIT).unwrap();
        let fine = FineMesh::build(&mesh, 3).unwrap();
        let pi = std::f64::consts::PI;
        let source = SourceTerm::sin_pi_pi(2.0 * pi * pi);
        let r = solve_reference(&mesh, &fine, &CoeffSpec::Identity, &source);
        assert!(r.pcg.converged, "{:?}", r.pcg);
        // Fine P1 error is O(h^2) pointwise-ish; h = 1/32 here.
        let mut max_err: f64 = 0.0;
        for (i, p) in fine.nodes.iter().enumerate() {
            let exact = (pi * p.x).sin() * (pi * p.y).sin();
            max_err = max_err.max((r.values[i] - exact).abs());
        }
        assert!(max_err < 5e-3, "max err {max_err}");
    }

    #[test]
    fn prolongation_is_exact_on_p1_fields() {
        let mesh = CoarseMesh::structured(2, 1, Rect::UNIT).unwrap();
        let from = FineMesh::build(&mesh, 1).unwrap();
        let to = FineMesh::build(&mesh, 3).unwrap();
        let patches_from = from.patches(&mesh);
        // An affine field is in every P1 space; prolongation reproduces it.
        let field = SolutionField {
            per_cell: patches_from
                .iter()
                .map(|p| DVector::from_fn(p.n_nodes(), |i, _| 3.0 * p.coords[i].x - p.coords[i].y))
                .collect(),
            method: "affine".into(),
            space_hash: [0; 32],
        };
        let out = prolong(&mesh, &from, &field, &to);
        for (ci, patch) in to.patches(&mesh).iter().enumerate() {
            for i in 0..patch.n_nodes() {
                let p = patch.coords[i];
                assert!((out.per_cell[ci][i] - (3.0 * p.x - p.y)).abs() < 1e-12);
            }
        }
    }
}
