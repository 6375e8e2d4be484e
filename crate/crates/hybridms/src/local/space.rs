use nalgebra::{DMatrix, DVector, Dyn};

use crate::mesh::{CellPatch, CoarseMesh, FineMesh, Point};
use crate::poly::{CellPolyBasis, FacePolyBasis};
use crate::problem::CoeffSpec;
use crate::quad::{SegmentRule, TriangleRule};

/// Failures of the per-cell fine solves.
#[derive(Debug, thiserror::Error)]
pub enum LocalSolveError {
    #[error("cell {cell}: augmented zero-mean system is singular")]
    SingularLifting { cell: usize },
    #[error("cell {cell}: face-constrained system is singular")]
    SingularConstrained { cell: usize },
    #[error("cell {cell}: moment matrix is numerically singular (cond {cond:.3e} > {limit:.1e}); the local space is not unisolvent at this refinement")]
    Unisolvence { cell: usize, cond: f64, limit: f64 },
    #[error("cell {cell}: lifting solve residual {residual:.3e} exceeds tolerance")]
    LargeResidual { cell: usize, residual: f64 },
}

/// The fine P1 space of one coarse cell with everything needed to lift
/// boundary fluxes and cell sources into it.
///
/// The zero-mean constraint defining the liftings is imposed by one Lagrange
/// multiplier row appended to the stiffness matrix; the augmented symmetric
/// indefinite matrix is factored once per cell and reused for every lifting.
pub struct LocalFineSpace {
    pub cell: usize,
    pub k: usize,
    pub m: usize,
    pub patch: CellPatch,
    /// Global face ids in cell order.
    pub face_ids: Vec<usize>,
    pub cell_basis: CellPolyBasis,
    pub face_bases: Vec<FacePolyBasis>,
    /// A-weighted P1 stiffness (A sampled at fine-triangle centroids).
    pub stiffness: DMatrix<f64>,
    /// Consistent P1 mass matrix.
    pub mass: DMatrix<f64>,
    /// Row of mean values (phi_i, 1)_K.
    pub mean_row: DVector<f64>,
    /// Face moment matrices B_F of shape (k+1) x n_nodes: pairing of fine
    /// traces with the face polynomial basis, assembled subedge-wise.
    pub face_moments: Vec<DMatrix<f64>>,
    pub area: f64,
    /// The coefficient the stiffness was assembled with.
    pub coeff: CoeffSpec,
    aug: nalgebra::LU<f64, Dyn, Dyn>,
    tri_rule: TriangleRule,
}

impl LocalFineSpace {
    pub fn build(
        mesh: &CoarseMesh,
        fine: &FineMesh,
        cell: usize,
        coeff: &CoeffSpec,
        k: usize,
        m: usize,
    ) -> Result<Self, LocalSolveError> {
        Self::from_patch(mesh, fine.patch(mesh, cell), coeff, k, m)
    }

    pub fn from_patch(
        mesh: &CoarseMesh,
        patch: CellPatch,
        coeff: &CoeffSpec,
        k: usize,
        m: usize,
    ) -> Result<Self, LocalSolveError> {
        let cell = patch.cell;
        let n = patch.n_nodes();
        let mut stiffness = DMatrix::zeros(n, n);
        let mut mass = DMatrix::zeros(n, n);
        let mut mean_row = DVector::zeros(n);
        for t in 0..patch.triangles.len() {
            let (area, grads) = patch.triangle_grads(t);
            let a = coeff.tensor_at(patch.triangle_centroid(t));
            let nodes = patch.triangles[t];
            for i in 0..3 {
                let agi = a * grads[i];
                for j in 0..3 {
                    stiffness[(nodes[i], nodes[j])] += area * agi.dot(&grads[j]);
                    mass[(nodes[i], nodes[j])] += area / 12.0 * if i == j { 2.0 } else { 1.0 };
                }
                mean_row[nodes[i]] += area / 3.0;
            }
        }

        let seg_rule = SegmentRule::with_degree(2 * k + 2);
        let face_bases: Vec<FacePolyBasis> = mesh.cells[cell]
            .faces
            .iter()
            .map(|&f| FacePolyBasis::for_face(mesh, f, k))
            .collect();
        let mut face_moments = Vec::with_capacity(face_bases.len());
        for (lf, basis) in face_bases.iter().enumerate() {
            let nodes = &patch.face_nodes[lf];
            let nsub = nodes.len() - 1;
            let mut b = DMatrix::zeros(basis.dim(), n);
            for s in 0..nsub {
                let t0 = s as f64 / nsub as f64 - 0.5;
                let dt = 1.0 / nsub as f64;
                for (&x, &w) in seg_rule.points.iter().zip(&seg_rule.weights) {
                    let tau = t0 + dt * x;
                    for j in 0..basis.dim() {
                        let common = basis.length * dt * w * basis.eval(j, tau);
                        b[(j, nodes[s])] += common * (1.0 - x);
                        b[(j, nodes[s + 1])] += common * x;
                    }
                }
            }
            face_moments.push(b);
        }

        // Augmented zero-mean system [[K, m], [m^T, 0]].
        let mut aug = DMatrix::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&stiffness);
        for i in 0..n {
            aug[(i, n)] = mean_row[i];
            aug[(n, i)] = mean_row[i];
        }
        let lu = aug.lu();
        // A zero pivot means the constrained problem is singular.
        if (0..=n).any(|i| lu.u()[(i, i)] == 0.0) {
            return Err(LocalSolveError::SingularLifting { cell });
        }

        let cell_basis = CellPolyBasis::for_cell(mesh, cell, m);
        Ok(LocalFineSpace {
            cell,
            k,
            m,
            patch,
            face_ids: mesh.cells[cell].faces.clone(),
            cell_basis,
            face_bases,
            stiffness,
            mass,
            mean_row,
            face_moments,
            area: mesh.cells[cell].area,
            coeff: coeff.clone(),
            aug: lu,
            tri_rule: TriangleRule::with_degree(2 * k.max(m) + 2),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.patch.n_nodes()
    }

    pub fn n_faces(&self) -> usize {
        self.face_bases.len()
    }

    /// Solve the zero-mean constrained stiffness system for a nodal load.
    /// Returns the solution; the multiplier absorbs any incompatibility of
    /// the load with the pure Neumann problem.
    pub fn solve_zero_mean(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, LocalSolveError> {
        let n = self.n_nodes();
        let mut ext = DVector::zeros(n + 1);
        ext.rows_mut(0, n).copy_from(rhs);
        let sol = self
            .aug
            .solve(&ext)
            .ok_or(LocalSolveError::SingularLifting { cell: self.cell })?;
        let x = sol.rows(0, n).into_owned();
        let alpha = sol[n];
        let residual = (&self.stiffness * &x + alpha * &self.mean_row - rhs).norm()
            / rhs.norm().max(1.0);
        if residual > 1e-11 {
            return Err(LocalSolveError::LargeResidual {
                cell: self.cell,
                residual,
            });
        }
        Ok(x)
    }

    /// Lift a boundary flux: the unique zero-mean fine function whose
    /// A-weighted gradient pairs against every test function like the given
    /// flux polynomial acts on its trace. `mu` holds one coefficient vector
    /// per face of the cell, expressing the flux with respect to the outward
    /// normal of this cell.
    pub fn lift_neumann(&self, mu: &[DVector<f64>]) -> Result<DVector<f64>, LocalSolveError> {
        assert_eq!(mu.len(), self.n_faces());
        let mut rhs = DVector::zeros(self.n_nodes());
        for (b, m) in self.face_moments.iter().zip(mu) {
            rhs.axpy(1.0, &(b.transpose() * m), 1.0);
        }
        self.solve_zero_mean(&rhs)
    }

    /// Lift a cell source polynomial (coefficients on this cell's P^m basis):
    /// the zero-mean fine function with that source and no boundary flux.
    pub fn lift_source(&self, g: &DVector<f64>) -> Result<DVector<f64>, LocalSolveError> {
        let rhs = self.polynomial_load(g);
        self.solve_zero_mean(&rhs)
    }

    /// Nodal load vector (g, phi_i)_K of a cell polynomial.
    pub fn polynomial_load(&self, g: &DVector<f64>) -> DVector<f64> {
        let mut rhs = DVector::zeros(self.n_nodes());
        for t in 0..self.patch.triangles.len() {
            let [a, b, c] = self.patch.triangles[t];
            let (pa, pb, pc) = (
                self.patch.coords[a],
                self.patch.coords[b],
                self.patch.coords[c],
            );
            let det = 2.0 * crate::mesh::signed_area(pa, pb, pc);
            for (&(u, v), &w) in self.tri_rule.points.iter().zip(&self.tri_rule.weights) {
                let p = pa + (pb - pa) * u + (pc - pa) * v;
                let gv = self.cell_basis.eval_poly(g, p);
                rhs[a] += det * w * gv * (1.0 - u - v);
                rhs[b] += det * w * gv * u;
                rhs[c] += det * w * gv * v;
            }
        }
        rhs
    }

    /// Nodal load vector of an arbitrary source field restricted to the cell.
    pub fn field_load(&self, f: &dyn Fn(Point) -> f64, rule: &TriangleRule) -> DVector<f64> {
        let mut rhs = DVector::zeros(self.n_nodes());
        for t in 0..self.patch.triangles.len() {
            let [a, b, c] = self.patch.triangles[t];
            let (pa, pb, pc) = (
                self.patch.coords[a],
                self.patch.coords[b],
                self.patch.coords[c],
            );
            let det = 2.0 * crate::mesh::signed_area(pa, pb, pc);
            for (&(u, v), &w) in rule.points.iter().zip(&rule.weights) {
                let p = pa + (pb - pa) * u + (pc - pa) * v;
                let fv = f(p);
                rhs[a] += det * w * fv * (1.0 - u - v);
                rhs[b] += det * w * fv * u;
                rhs[c] += det * w * fv * v;
            }
        }
        rhs
    }

    /// Minimize the energy under prescribed face moments: solve
    /// [[K, C^T], [C, 0]] [x; nu] = [rhs; moments] where the rows of C are
    /// all face moment functionals. Returns the solution and the flux
    /// polynomial coefficients per face (the negated multipliers).
    pub fn solve_with_face_constraints(
        &self,
        rhs: &DVector<f64>,
        moments: &[DVector<f64>],
    ) -> Result<(DVector<f64>, Vec<DVector<f64>>), LocalSolveError> {
        let n = self.n_nodes();
        let nf = self.k + 1;
        let nc = nf * self.n_faces();
        let mut sys = DMatrix::zeros(n + nc, n + nc);
        sys.view_mut((0, 0), (n, n)).copy_from(&self.stiffness);
        for (lf, b) in self.face_moments.iter().enumerate() {
            for j in 0..nf {
                for i in 0..n {
                    sys[(i, n + lf * nf + j)] = b[(j, i)];
                    sys[(n + lf * nf + j, i)] = b[(j, i)];
                }
            }
        }
        let mut ext = DVector::zeros(n + nc);
        ext.rows_mut(0, n).copy_from(rhs);
        for (lf, m) in moments.iter().enumerate() {
            ext.rows_mut(n + lf * nf, nf).copy_from(m);
        }
        let sol = sys
            .lu()
            .solve(&ext)
            .ok_or(LocalSolveError::SingularConstrained { cell: self.cell })?;
        let x = sol.rows(0, n).into_owned();
        let flux = (0..self.n_faces())
            .map(|lf| -sol.rows(n + lf * nf, nf).into_owned())
            .collect();
        Ok((x, flux))
    }

    /// Energy inner product (A grad u, grad v)_K of two fine fields.
    pub fn energy_product(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (&self.stiffness * v).dot(u)
    }

    /// Mean value (u, 1)_K / |K|.
    pub fn mean(&self, u: &DVector<f64>) -> f64 {
        self.mean_row.dot(u) / self.area
    }

    /// The coefficient sample the stiffness used on local triangle `t`.
    pub fn coeff_sample(&self, t: usize) -> nalgebra::Matrix2<f64> {
        self.coeff.tensor_at(self.patch.triangle_centroid(t))
    }
}
