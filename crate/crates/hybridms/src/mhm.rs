//! The MHM method: a global saddle-point system coupling skeletal flux
//! unknowns (one polynomial block per coarse face, boundary faces included)
//! with one constant per cell, solved by direct factorization and followed by
//! a per-cell reconstruction in the primal basis.
//!
//! Sign convention: the system is assembled as
//!
//! ```text
//! [ -A  -B ] [ lambda ]   [ F_l ]
//! [ -B'  0 ] [ u0     ] = [ F_0 ]
//! ```
//!
//! where A is the (positive semidefinite) energy coupling of the face
//! liftings, so the lambda-lambda block carried by the matrix is negative
//! semidefinite; B pairs face modes with cell constants; F_0 holds the cell
//! averages of the source and F_l its moments against the face liftings. The
//! cell-row equations state that the skeletal flux of each cell balances the
//! source average exactly.

use nalgebra::{DMatrix, DVector, Dyn};

use crate::field::{SkeletonVector, SolutionField};
use crate::local::{LocalBasisSet, LocalFineSpace};
use crate::mesh::{CoarseMesh, FineMesh};
use crate::problem::{CoeffSpec, SourceTerm};

#[derive(Debug, thiserror::Error)]
pub enum MethodError {
    #[error("basis set missing for cell {0}")]
    MissingBasis(usize),
    #[error("global system is singular: {0}")]
    Singular(String),
    #[error("system matrix is not symmetric positive definite")]
    NotSpd,
    #[error("solve residual {0:.3e} exceeds tolerance")]
    LargeResidual(f64),
    #[error(transparent)]
    Local(#[from] crate::local::LocalSolveError),
}

/// Assembled MHM saddle-point system with its factorization.
pub struct MhmSystem {
    pub n_cells: usize,
    pub n_faces: usize,
    /// Face modes per face (k + 1).
    pub n_modes: usize,
    pub matrix: DMatrix<f64>,
    lu: nalgebra::LU<f64, Dyn, Dyn>,
}

impl MhmSystem {
    pub fn size(&self) -> usize {
        self.n_faces * self.n_modes + self.n_cells
    }

    fn face_row(&self, face: usize, mode: usize) -> usize {
        face * self.n_modes + mode
    }

    fn cell_row(&self, cell: usize) -> usize {
        self.n_faces * self.n_modes + cell
    }
}

/// Assemble the MHM system from the offline bases.
pub fn assemble(mesh: &CoarseMesh, bases: &[LocalBasisSet]) -> Result<MhmSystem, MethodError> {
    if bases.len() != mesh.cells.len() {
        return Err(MethodError::MissingBasis(bases.len()));
    }
    let n_modes = bases[0].n_face;
    let n_faces = mesh.faces.len();
    let n_cells = mesh.cells.len();
    let size = n_faces * n_modes + n_cells;
    let mut m = DMatrix::zeros(size, size);

    for (ci, set) in bases.iter().enumerate() {
        let cell = &mesh.cells[ci];
        for (lf_out, (&f_out, &s_out)) in cell.faces.iter().zip(&cell.signs).enumerate() {
            // Face-face couplings: moments of the face liftings' traces.
            for (lf_in, (&f_in, &s_in)) in cell.faces.iter().zip(&cell.signs).enumerate() {
                let rf = &set.raw_face_moments[lf_out];
                for j_out in 0..n_modes {
                    let row = f_out * n_modes + j_out;
                    for j_in in 0..n_modes {
                        let col = f_in * n_modes + j_in;
                        m[(row, col)] -= s_out * s_in * rf[(j_out, set.col_face(lf_in, j_in))];
                    }
                }
            }
            // Face-cell couplings: (psi^F_j, 1)_F with the cell's sign.
            for j_out in 0..n_modes {
                let row = f_out * n_modes + j_out;
                let col = n_faces * n_modes + ci;
                let v = s_out * set.gram_faces[lf_out][(j_out, 0)];
                m[(row, col)] -= v;
                m[(col, row)] -= v;
            }
        }
    }

    let lu = m.clone().lu();
    if (0..size).any(|i| lu.u()[(i, i)] == 0.0) {
        return Err(MethodError::Singular(
            "zero pivot in saddle-point factorization".into(),
        ));
    }
    Ok(MhmSystem {
        n_cells,
        n_faces,
        n_modes,
        matrix: m,
        lu,
    })
}

/// Solution of the upscaled MHM problem.
#[derive(Debug, Clone)]
pub struct MhmSolution {
    /// Cell averages (the piecewise-constant component).
    pub u0: DVector<f64>,
    /// Skeletal flux, one block per coarse face with respect to the global
    /// face normal; the trace seen from cell K is sign(K, F) times the block.
    pub lambda: SkeletonVector,
    /// Relative residual of the linear solve.
    pub residual: f64,
}

/// Right-hand side from projected source coefficients (multi-query path:
/// everything is read off the offline moment data).
pub fn rhs_from_coeffs(
    system: &MhmSystem,
    mesh: &CoarseMesh,
    bases: &[LocalBasisSet],
    f: &[DVector<f64>],
) -> DVector<f64> {
    let mut rhs = DVector::zeros(system.size());
    for (ci, set) in bases.iter().enumerate() {
        let cell = &mesh.cells[ci];
        // Cell rows: source average (Pi^m f, 1)_K.
        rhs[system.cell_row(ci)] = set.gram_cell.column(0).dot(&f[ci]);
        // Face rows: moments of the source against the face liftings.
        for (lf, (&fi, &s)) in cell.faces.iter().zip(&cell.signs).enumerate() {
            for j in 0..system.n_modes {
                let mut acc = 0.0;
                for i in 1..set.n_cell {
                    acc += f[ci][i] * set.raw_cell_moments[(i, set.col_face(lf, j))];
                }
                rhs[system.face_row(fi, j)] += s * acc;
            }
        }
    }
    rhs
}

/// Solve for one source (projected coefficients per cell), reusing the
/// factorization.
pub fn solve(
    system: &MhmSystem,
    mesh: &CoarseMesh,
    bases: &[LocalBasisSet],
    f: &[DVector<f64>],
) -> Result<MhmSolution, MethodError> {
    let rhs = rhs_from_coeffs(system, mesh, bases, f);
    solve_rhs(system, &rhs)
}

fn solve_rhs(system: &MhmSystem, rhs: &DVector<f64>) -> Result<MhmSolution, MethodError> {
    let x = system
        .lu
        .solve(rhs)
        .ok_or_else(|| MethodError::Singular("saddle-point back-substitution failed".into()))?;
    let residual = (&system.matrix * &x - rhs).norm() / rhs.norm().max(1.0);
    if residual > 1e-9 {
        return Err(MethodError::LargeResidual(residual));
    }
    let mut lambda = SkeletonVector::zeros(system.n_faces, system.n_modes);
    for fidx in 0..system.n_faces {
        for j in 0..system.n_modes {
            lambda.coeffs[fidx][j] = x[system.face_row(fidx, j)];
        }
    }
    let u0 = DVector::from_fn(system.n_cells, |c, _| x[system.cell_row(c)]);
    Ok(MhmSolution { u0, lambda, residual })
}

/// Primal coordinates of the solution on one cell (multi-query expansion).
pub fn primal_coords(
    mesh: &CoarseMesh,
    set: &LocalBasisSet,
    cell: usize,
    sol: &MhmSolution,
    f: &DVector<f64>,
) -> DVector<f64> {
    let mut coords = DVector::zeros(set.n_cols());
    coords[0] = sol.u0[cell];
    for i in 1..set.n_cell {
        coords[i] = f[i];
    }
    let c = &mesh.cells[cell];
    for (lf, (&fi, &s)) in c.faces.iter().zip(&c.signs).enumerate() {
        for j in 0..set.n_face {
            coords[set.col_face(lf, j)] = s * sol.lambda.coeffs[fi][j];
        }
    }
    coords
}

/// Reconstruct the solution field by primal basis expansion.
pub fn reconstruct(
    mesh: &CoarseMesh,
    bases: &[LocalBasisSet],
    sol: &MhmSolution,
    f: &[DVector<f64>],
) -> SolutionField {
    let per_cell = bases
        .iter()
        .enumerate()
        .map(|(ci, set)| set.combine(&primal_coords(mesh, set, ci, sol, &f[ci])))
        .collect();
    SolutionField {
        per_cell,
        method: "mhm".into(),
        space_hash: [0; 32],
    }
}

/// Reconstruct through the mono-query route: the cell-basis expansion of the
/// source lifting is replaced by one fresh local solve per cell.
pub fn reconstruct_monoquery(
    mesh: &CoarseMesh,
    fine: &FineMesh,
    coeff: &CoeffSpec,
    bases: &[LocalBasisSet],
    sol: &MhmSolution,
    f: &[DVector<f64>],
) -> Result<SolutionField, MethodError> {
    let mut per_cell = Vec::with_capacity(mesh.cells.len());
    for (ci, set) in bases.iter().enumerate() {
        let space = LocalFineSpace::build(mesh, fine, ci, coeff, set.k, set.m)?;
        let ts = space.lift_source(&f[ci])?;
        let mut coords = DVector::zeros(set.n_cols());
        coords[0] = sol.u0[ci];
        let c = &mesh.cells[ci];
        for (lf, (&fi, &s)) in c.faces.iter().zip(&c.signs).enumerate() {
            for j in 0..set.n_face {
                coords[set.col_face(lf, j)] = s * sol.lambda.coeffs[fi][j];
            }
        }
        per_cell.push(set.combine(&coords) + ts);
    }
    Ok(SolutionField {
        per_cell,
        method: "mhm-monoquery".into(),
        space_hash: [0; 32],
    })
}

/// Fully mono-query online stage: the face-row right-hand side is read off
/// the trace moments of the per-cell source liftings instead of the offline
/// cell-basis moments, so the cell columns of the primal basis are never
/// needed. Returns the solution and the reconstructed field.
pub fn solve_monoquery(
    system: &MhmSystem,
    mesh: &CoarseMesh,
    fine: &FineMesh,
    coeff: &CoeffSpec,
    bases: &[LocalBasisSet],
    source: &SourceTerm,
) -> Result<(MhmSolution, SolutionField), MethodError> {
    let mut rhs = DVector::zeros(system.size());
    let mut liftings = Vec::with_capacity(mesh.cells.len());
    let rule = crate::quad::TriangleRule::with_degree(12);
    for (ci, set) in bases.iter().enumerate() {
        let space = LocalFineSpace::build(mesh, fine, ci, coeff, set.k, set.m)?;
        // Project the source onto P^m(K) and lift it in one local solve.
        let mut f_raw = DVector::zeros(set.n_cell);
        for t in 0..space.patch.triangles.len() {
            let [a, b, c] = space.patch.triangles[t];
            let (pa, pb, pc) = (
                space.patch.coords[a],
                space.patch.coords[b],
                space.patch.coords[c],
            );
            let det = 2.0 * crate::mesh::signed_area(pa, pb, pc);
            for (&(u, v), &w) in rule.points.iter().zip(&rule.weights) {
                let p = pa + (pb - pa) * u + (pc - pa) * v;
                let fv = source.value(ci, p);
                for i in 0..set.n_cell {
                    f_raw[i] += det * w * fv * space.cell_basis.eval(i, p);
                }
            }
        }
        let f_coeffs = set
            .gram_cell
            .clone()
            .cholesky()
            .ok_or(MethodError::NotSpd)?
            .solve(&f_raw);
        let ts = space.lift_source(&f_coeffs)?;
        rhs[system.cell_row(ci)] = set.gram_cell.column(0).dot(&f_coeffs);
        let cell = &mesh.cells[ci];
        for (lf, (&fi, &s)) in cell.faces.iter().zip(&cell.signs).enumerate() {
            let tr = &space.face_moments[lf] * &ts;
            for j in 0..system.n_modes {
                rhs[system.face_row(fi, j)] += s * tr[j];
            }
        }
        liftings.push((ts, f_coeffs));
    }
    let sol = solve_rhs(system, &rhs)?;
    let mut per_cell = Vec::with_capacity(mesh.cells.len());
    for (ci, set) in bases.iter().enumerate() {
        let (ts, _f) = &liftings[ci];
        let mut coords = DVector::zeros(set.n_cols());
        coords[0] = sol.u0[ci];
        let c = &mesh.cells[ci];
        for (lf, (&fi, &s)) in c.faces.iter().zip(&c.signs).enumerate() {
            for j in 0..set.n_face {
                coords[set.col_face(lf, j)] = s * sol.lambda.coeffs[fi][j];
            }
        }
        per_cell.push(set.combine(&coords) + ts);
    }
    Ok((
        sol,
        SolutionField {
            per_cell,
            method: "mhm-monoquery".into(),
            space_hash: [0; 32],
        },
    ))
}

/// Per-cell compatibility residual: the skeletal flux of each cell must
/// balance the source average, |sum_F sign <lambda_F, 1>_F + (Pi^m f, 1)_K|,
/// normalized by 1 + |(Pi^m f, 1)_K|.
pub fn compatibility_residuals(
    mesh: &CoarseMesh,
    bases: &[LocalBasisSet],
    sol: &MhmSolution,
    f: &[DVector<f64>],
) -> Vec<f64> {
    bases
        .iter()
        .enumerate()
        .map(|(ci, set)| {
            let cell = &mesh.cells[ci];
            let mut flux = 0.0;
            for (lf, (&fi, &s)) in cell.faces.iter().zip(&cell.signs).enumerate() {
                flux += s * set.gram_faces[lf].column(0).dot(&sol.lambda.coeffs[fi]);
            }
            let favg = set.gram_cell.column(0).dot(&f[ci]);
            (flux + favg).abs() / (1.0 + favg.abs())
        })
        .collect()
}
