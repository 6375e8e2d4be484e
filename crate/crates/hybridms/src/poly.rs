//! Scaled monomial bases on cells and faces, Gram matrices, and L2-orthogonal
//! projectors.
//!
//! Cell bases are the monomials ((x - x_K)/H_K)^alpha ordered by total degree
//! (graded lexicographic), so the first function is identically 1. Face bases
//! are monomials in the normalized arclength coordinate tau = s/|F| - 1/2,
//! where s runs from face endpoint `a` to `b`. Neither basis is
//! orthonormalized; projections solve the (SPD) Gram system per cell or face.

use nalgebra::{DMatrix, DVector};

use crate::mesh::{CellPatch, CoarseMesh, Point};
use crate::quad::{SegmentRule, TriangleRule};

/// Dimension of the bivariate polynomial space of total degree <= q.
pub fn dim_cell(q: usize) -> usize {
    (q + 1) * (q + 2) / 2
}

/// Dimension of the univariate polynomial space of degree <= q.
pub fn dim_face(q: usize) -> usize {
    q + 1
}

/// Exponent pairs (ax, ay) of bivariate monomials up to degree q, graded
/// lexicographic; the first entry is (0, 0).
pub fn monomial_exponents(q: usize) -> Vec<(u32, u32)> {
    let mut exps = Vec::with_capacity(dim_cell(q));
    for total in 0..=q as u32 {
        for ax in (0..=total).rev() {
            exps.push((ax, total - ax));
        }
    }
    exps
}

/// Scaled monomial basis of P^q on one cell.
#[derive(Debug, Clone)]
pub struct CellPolyBasis {
    pub degree: usize,
    pub center: Point,
    pub scale: f64,
    exps: Vec<(u32, u32)>,
}

impl CellPolyBasis {
    pub fn new(degree: usize, center: Point, scale: f64) -> Self {
        CellPolyBasis {
            degree,
            center,
            scale,
            exps: monomial_exponents(degree),
        }
    }

    /// Basis for the given cell of a coarse mesh.
    pub fn for_cell(mesh: &CoarseMesh, cell: usize, degree: usize) -> Self {
        let c = &mesh.cells[cell];
        Self::new(degree, c.centroid, c.diameter)
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn eval(&self, i: usize, p: Point) -> f64 {
        let (ax, ay) = self.exps[i];
        let x = (p.x - self.center.x) / self.scale;
        let y = (p.y - self.center.y) / self.scale;
        x.powi(ax as i32) * y.powi(ay as i32)
    }

    /// Evaluate a coefficient vector at a point.
    pub fn eval_poly(&self, coeffs: &DVector<f64>, p: Point) -> f64 {
        (0..self.dim()).map(|i| coeffs[i] * self.eval(i, p)).sum()
    }

    /// Gram matrix (psi_i, psi_j)_K integrated over the patch triangles.
    pub fn gram(&self, patch: &CellPatch, rule: &TriangleRule) -> DMatrix<f64> {
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        for t in 0..patch.triangles.len() {
            let [a, b, c] = patch.triangles[t];
            let (pa, pb, pc) = (patch.coords[a], patch.coords[b], patch.coords[c]);
            let det = 2.0 * crate::mesh::signed_area(pa, pb, pc);
            for (&(u, v), &w) in rule.points.iter().zip(&rule.weights) {
                let p = pa + (pb - pa) * u + (pc - pa) * v;
                let vals: Vec<f64> = (0..n).map(|i| self.eval(i, p)).collect();
                for i in 0..n {
                    for j in i..n {
                        g[(i, j)] += det * w * vals[i] * vals[j];
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        g
    }
}

/// Scaled monomial basis of P^q on one face, in the normalized arclength
/// coordinate tau in [-1/2, 1/2].
#[derive(Debug, Clone)]
pub struct FacePolyBasis {
    pub degree: usize,
    pub length: f64,
}

impl FacePolyBasis {
    pub fn for_face(mesh: &CoarseMesh, face: usize, degree: usize) -> Self {
        FacePolyBasis {
            degree,
            length: mesh.faces[face].length,
        }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    /// Evaluate basis function `j` at normalized arclength tau in [-1/2, 1/2].
    pub fn eval(&self, j: usize, tau: f64) -> f64 {
        tau.powi(j as i32)
    }

    pub fn eval_poly(&self, coeffs: &DVector<f64>, tau: f64) -> f64 {
        (0..self.dim()).map(|j| coeffs[j] * self.eval(j, tau)).sum()
    }

    /// Gram matrix (psi_i, psi_j)_F; closed form of the tau-moment integrals.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            let p = (i + j) as i32;
            if p % 2 == 1 {
                0.0
            } else {
                self.length / (2f64.powi(p) * (p as f64 + 1.0))
            }
        })
    }
}

/// 2-norm condition number of a small dense matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// L2-orthogonal projection of a scalar field onto P^q(K).
///
/// Returns the coefficient vector on the cell's scaled monomial basis.
pub fn project_cell(
    f: &dyn Fn(Point) -> f64,
    patch: &CellPatch,
    basis: &CellPolyBasis,
    rule: &TriangleRule,
) -> DVector<f64> {
    let n = basis.dim();
    let gram = basis.gram(patch, rule);
    let mut rhs = DVector::zeros(n);
    for t in 0..patch.triangles.len() {
        let [a, b, c] = patch.triangles[t];
        let (pa, pb, pc) = (patch.coords[a], patch.coords[b], patch.coords[c]);
        let det = 2.0 * crate::mesh::signed_area(pa, pb, pc);
        for (&(u, v), &w) in rule.points.iter().zip(&rule.weights) {
            let p = pa + (pb - pa) * u + (pc - pa) * v;
            let fv = f(p);
            for i in 0..n {
                rhs[i] += det * w * fv * basis.eval(i, p);
            }
        }
    }
    gram.cholesky()
        .expect("cell Gram matrix must be SPD")
        .solve(&rhs)
}

/// L2-orthogonal projection onto P^q(F) of a field given in normalized
/// arclength tau.
pub fn project_face(
    g: &dyn Fn(f64) -> f64,
    basis: &FacePolyBasis,
    rule: &SegmentRule,
) -> DVector<f64> {
    let n = basis.dim();
    let gram = basis.gram();
    let mut rhs = DVector::zeros(n);
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let tau = x - 0.5;
        let gv = g(tau);
        for j in 0..n {
            rhs[j] += basis.length * w * gv * basis.eval(j, tau);
        }
    }
    gram.cholesky()
        .expect("face Gram matrix must be SPD")
        .solve(&rhs)
}

/// Moments (g, psi_j)_F of the piecewise-linear trace of a patch field along
/// one cell face, integrated subedge by subedge (exact for P1 times P^q).
pub fn face_trace_moments(
    values: &DVector<f64>,
    patch: &CellPatch,
    local_face: usize,
    basis: &FacePolyBasis,
    rule: &SegmentRule,
) -> DVector<f64> {
    let nodes = &patch.face_nodes[local_face];
    let nsub = nodes.len() - 1;
    let mut rhs = DVector::zeros(basis.dim());
    for s in 0..nsub {
        let (la, lb) = (nodes[s], nodes[s + 1]);
        let (va, vb) = (values[la], values[lb]);
        // Subedges are equal-length pieces of the face; tau spans
        // [s/nsub - 1/2, (s+1)/nsub - 1/2] on this piece.
        let t0 = s as f64 / nsub as f64 - 0.5;
        let dt = 1.0 / nsub as f64;
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            let tau = t0 + dt * x;
            let val = va + (vb - va) * x;
            for j in 0..basis.dim() {
                rhs[j] += basis.length * dt * w * val * basis.eval(j, tau);
            }
        }
    }
    rhs
}

/// L2 projection onto P^q(F) of the trace of a patch field.
pub fn project_face_trace(
    values: &DVector<f64>,
    patch: &CellPatch,
    local_face: usize,
    basis: &FacePolyBasis,
    rule: &SegmentRule,
) -> DVector<f64> {
    let rhs = face_trace_moments(values, patch, local_face, basis, rule);
    basis
        .gram()
        .cholesky()
        .expect("face Gram matrix must be SPD")
        .solve(&rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{CoarseMesh, FineMesh, Rect};
    use rand::rngs::StdRng;
    use rand::{RngExt, SeedableRng};

    fn unit_patch(r: u32) -> (CoarseMesh, FineMesh, CellPatch) {
        let coarse = CoarseMesh::structured(1, 1, Rect::UNIT).unwrap();
        let fine = FineMesh::build(&coarse, r).unwrap();
        let patch = fine.patches(&coarse).remove(0);
        (coarse, fine, patch)
    }

    #[test]
    fn exponent_order_starts_with_constant() {
        let e = monomial_exponents(2);
        assert_eq!(e, vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
    }

    #[test]
    fn project_constant_recovers_constant() {
        let (coarse, _fine, patch) = unit_patch(1);
        let basis = CellPolyBasis::for_cell(&coarse, 0, 2);
        let rule = TriangleRule::with_degree(6);
        let c = project_cell(&|_| 3.0, &patch, &basis, &rule);
        assert!((c[0] - 3.0).abs() < 1e-12);
        // Tail coefficients vanish up to Gram-conditioning roundoff.
        assert!(c.rows(1, c.len() - 1).amax() < 1e-11);
        for p in [Point::new(0.1, 0.3), Point::new(0.9, 0.8)] {
            assert!((basis.eval_poly(&c, p) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn project_reproduces_linear() {
        let (coarse, _fine, patch) = unit_patch(2);
        let basis = CellPolyBasis::for_cell(&coarse, 0, 1);
        let rule = TriangleRule::with_degree(6);
        let c = project_cell(&|p| p.x, &patch, &basis, &rule);
        // x = x_K + H tau_x: coefficients (x_K, H, 0) on (1, tau_x, tau_y).
        assert!((c[0] - 0.5).abs() < 1e-12);
        assert!((c[1] - basis.scale).abs() < 1e-12);
        assert!(c[2].abs() < 1e-12);
    }

    #[test]
    fn project_sin_against_independent_quadrature() {
        let (coarse, _fine, patch) = unit_patch(2);
        let basis = CellPolyBasis::for_cell(&coarse, 0, 0);
        let f = |p: Point| (std::f64::consts::PI * p.x).sin();
        let c = project_cell(&f, &patch, &basis, &TriangleRule::with_degree(12));
        // Independent high-order quadrature of the mean value.
        let oracle_rule = TriangleRule::with_degree(20);
        let mut mean = 0.0;
        for t in 0..patch.triangles.len() {
            let [a, b, cc] = patch.triangles[t];
            mean += oracle_rule.integrate(
                patch.coords[a].into(),
                patch.coords[b].into(),
                patch.coords[cc].into(),
                |x, y| f(Point::new(x, y)),
            );
        }
        assert!((c[0] - mean).abs() < 1e-12, "{} vs {}", c[0], mean);
    }

    #[test]
    fn projector_is_idempotent() {
        let (coarse, _fine, patch) = unit_patch(1);
        let basis = CellPolyBasis::for_cell(&coarse, 0, 3);
        let rule = TriangleRule::with_degree(10);
        let f = |p: Point| (2.0 * p.x - p.y).exp();
        let c1 = project_cell(&f, &patch, &basis, &rule);
        let b2 = basis.clone();
        let c2 = project_cell(&move |p| b2.eval_poly(&c1.clone(), p), &patch, &basis, &rule);
        let c1b = project_cell(&f, &patch, &basis, &rule);
        assert!((c2 - &c1b).amax() < 1e-13 * c1b.amax().max(1.0));
    }

    #[test]
    fn projection_is_best_approximation() {
        let (coarse, _fine, patch) = unit_patch(1);
        let q = 2;
        let basis = CellPolyBasis::for_cell(&coarse, 0, q);
        let rule = TriangleRule::with_degree(12);
        let f = |p: Point| (3.0 * p.x).sin() * (2.0 * p.y).cos();
        let coeffs = project_cell(&f, &patch, &basis, &rule);
        let l2_dist = |c: &DVector<f64>| -> f64 {
            let mut acc = 0.0;
            for t in 0..patch.triangles.len() {
                let [a, b, cc] = patch.triangles[t];
                acc += rule.integrate(
                    patch.coords[a].into(),
                    patch.coords[b].into(),
                    patch.coords[cc].into(),
                    |x, y| {
                        let p = Point::new(x, y);
                        (f(p) - basis.eval_poly(c, p)).powi(2)
                    },
                );
            }
            acc.sqrt()
        };
        let best = l2_dist(&coeffs);
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..100 {
            let trial = DVector::from_fn(basis.dim(), |_, _| rng.random_range(-1.0..1.0));
            assert!(l2_dist(&trial) >= best - 1e-12);
        }
    }

    #[test]
    fn face_projection_reproduces_polynomials() {
        let coarse = CoarseMesh::structured(1, 1, Rect::UNIT).unwrap();
        let basis = FacePolyBasis::for_face(&coarse, 0, 2);
        let rule = SegmentRule::with_degree(8);
        let c = project_face(&|_| 1.0, &basis, &rule);
        assert!((c[0] - 1.0).abs() < 1e-13 && c[1].abs() < 1e-13 && c[2].abs() < 1e-13);
        let c = project_face(&|tau| tau, &basis, &rule);
        assert!((c[1] - 1.0).abs() < 1e-12 && c[0].abs() < 1e-13 && c[2].abs() < 1e-12);
    }

    #[test]
    fn fine_trace_projection_matches_dense_oracle() {
        let coarse = CoarseMesh::structured(1, 1, Rect::UNIT).unwrap();
        let fine = FineMesh::build(&coarse, 3).unwrap();
        let patch = fine.patches(&coarse).remove(0);
        // A generic P1 field on the patch.
        let values = DVector::from_fn(patch.n_nodes(), |i, _| {
            let p = patch.coords[i];
            (1.3 * p.x - 0.4 * p.y) * p.x + 0.7 * p.y
        });
        let basis = FacePolyBasis::for_face(&coarse, 0, 2);
        let got = project_face_trace(&values, &patch, 0, &basis, &SegmentRule::with_degree(4));
        let ora = project_face_trace(&values, &patch, 0, &basis, &SegmentRule::with_degree(30));
        assert!((got - ora).amax() < 1e-12);
    }

    #[test]
    fn gram_matrices_are_spd_with_finite_condition() {
        let (coarse, _fine, patch) = unit_patch(1);
        for q in 0..=4 {
            let basis = CellPolyBasis::for_cell(&coarse, 0, q);
            let g = basis.gram(&patch, &TriangleRule::with_degree(2 * q + 2));
            assert!(g.clone().cholesky().is_some(), "degree {q} Gram not SPD");
            assert!(condition_number(&g).is_finite());
        }
        for q in 0..=4 {
            let basis = FacePolyBasis::for_face(&coarse, 0, q);
            assert!(basis.gram().cholesky().is_some());
        }
    }
}
