//! The MsHHO method in condensed form (cell unknowns eliminated), the
//! uncondensed energy formulation kept as a cross-validation oracle, and the
//! purely face-based variant.
//!
//! All three paths assemble coefficient-space blocks built from the dual (or
//! face-based) multiplier data: divergence blocks G and flux blocks M. The
//! global face systems are premultiplied per face-row by the face Gram
//! matrix, which turns the raw coefficient equations into the equivalent
//! energy form; with non-orthonormal monomial face bases that is what makes
//! the assembled matrix symmetric positive definite while leaving the
//! solution unchanged.

use std::ops::AddAssign;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::field::{SkeletonVector, SolutionField};
use crate::local::{LocalBasisSet, LocalFineSpace};
use crate::mesh::{CoarseMesh, FineMesh};
use crate::mhm::MethodError;
use crate::problem::CoeffSpec;

/// Map from coarse faces to contiguous interior-face slots.
#[derive(Debug, Clone)]
pub struct InteriorFaceMap {
    pub slot_of_face: Vec<Option<usize>>,
    pub faces: Vec<usize>,
    pub n_modes: usize,
}

impl InteriorFaceMap {
    pub fn new(mesh: &CoarseMesh, n_modes: usize) -> Self {
        let mut slot_of_face = vec![None; mesh.faces.len()];
        let mut faces = Vec::new();
        for f in mesh.interior_faces() {
            slot_of_face[f] = Some(faces.len());
            faces.push(f);
        }
        InteriorFaceMap {
            slot_of_face,
            faces,
            n_modes,
        }
    }

    pub fn size(&self) -> usize {
        self.faces.len() * self.n_modes
    }

    pub fn offset(&self, slot: usize) -> usize {
        slot * self.n_modes
    }
}

/// Condensed SPD system on interior-face unknowns.
pub struct CondensedSystem {
    pub map: InteriorFaceMap,
    pub matrix: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

/// Assemble the condensed system: per cell, the face-face flux blocks minus
/// the static condensation correction through the inverted cell divergence
/// block.
pub fn assemble_condensed(
    mesh: &CoarseMesh,
    bases: &[LocalBasisSet],
) -> Result<CondensedSystem, MethodError> {
    if bases.len() != mesh.cells.len() {
        return Err(MethodError::MissingBasis(bases.len()));
    }
    let n_modes = bases[0].n_face;
    let map = InteriorFaceMap::new(mesh, n_modes);
    let size = map.size();
    let mut matrix = DMatrix::zeros(size, size);
    for (ci, set) in bases.iter().enumerate() {
        let cell = &mesh.cells[ci];
        for (lf_out, &f_out) in cell.faces.iter().enumerate() {
            let Some(slot_out) = map.slot_of_face[f_out] else {
                continue;
            };
            let gram_out = &set.gram_faces[lf_out];
            let mfk_inv = set.m_fk(lf_out) * &set.g_kk_inv;
            for (lf_in, &f_in) in cell.faces.iter().enumerate() {
                let Some(slot_in) = map.slot_of_face[f_in] else {
                    continue;
                };
                let block =
                    gram_out * (set.m_ff(lf_out, lf_in) - &mfk_inv * set.g_kf(lf_in));
                matrix
                    .view_mut((map.offset(slot_out), map.offset(slot_in)), (n_modes, n_modes))
                    .add_assign(&block);
            }
        }
    }
    let chol = matrix.clone().cholesky();
    if size > 0 && chol.is_none() {
        return Err(MethodError::NotSpd);
    }
    Ok(CondensedSystem { map, matrix, chol })
}

/// Solution of the MsHHO problem: face moments (interior skeleton, zero on
/// the boundary) and cell moment coefficients.
#[derive(Debug, Clone)]
pub struct MshhoSolution {
    /// One block per coarse face; boundary blocks are zero.
    pub u_faces: SkeletonVector,
    /// Cell moment coefficients per cell.
    pub u_cells: Vec<DVector<f64>>,
}

/// Solve the condensed system for one projected source, then reconstruct the
/// cell unknowns per cell.
pub fn solve_condensed(
    system: &CondensedSystem,
    mesh: &CoarseMesh,
    bases: &[LocalBasisSet],
    f: &[DVector<f64>],
) -> Result<MshhoSolution, MethodError> {
    let n_modes = system.map.n_modes;
    let mut rhs = DVector::zeros(system.map.size());
    for (ci, set) in bases.iter().enumerate() {
        let cell = &mesh.cells[ci];
        let gf = &set.g_kk_inv * &f[ci];
        for (lf_out, &f_out) in cell.faces.iter().enumerate() {
            let Some(slot_out) = system.map.slot_of_face[f_out] else {
                continue;
            };
            let v = &set.gram_faces[lf_out] * (set.m_fk(lf_out) * &gf);
            rhs.rows_mut(system.map.offset(slot_out), n_modes)
                .add_assign(&(-v));
        }
    }
    let x = if system.map.size() == 0 {
        DVector::zeros(0)
    } else {
        system
            .chol
            .as_ref()
            .ok_or(MethodError::NotSpd)?
            .solve(&rhs)
    };

    let mut u_faces = SkeletonVector::zeros(mesh.faces.len(), n_modes);
    for (slot, &face) in system.map.faces.iter().enumerate() {
        u_faces.coeffs[face] = x.rows(system.map.offset(slot), n_modes).into_owned();
    }
    // Cell recovery: u_K = inv(G^KK) (f_K - sum_F G^KF u_F).
    let u_cells = bases
        .iter()
        .enumerate()
        .map(|(ci, set)| {
            let cell = &mesh.cells[ci];
            let mut r = f[ci].clone();
            for (lf, &fi) in cell.faces.iter().enumerate() {
                if system.map.slot_of_face[fi].is_some() {
                    r -= set.g_kf(lf) * &u_faces.coeffs[fi];
                }
            }
            &set.g_kk_inv * r
        })
        .collect();
    Ok(MshhoSolution { u_faces, u_cells })
}

/// Reconstruct the solution field as the dual-basis expansion of the DOFs
/// (equivalently, the cellwise reconstruction operator applied to them).
pub fn reconstruct(
    mesh: &CoarseMesh,
    bases: &[LocalBasisSet],
    sol: &MshhoSolution,
) -> SolutionField {
    let per_cell = bases
        .iter()
        .enumerate()
        .map(|(ci, set)| {
            let cell = &mesh.cells[ci];
            let face_blocks: Vec<DVector<f64>> = cell
                .faces
                .iter()
                .map(|&fi| sol.u_faces.coeffs[fi].clone())
                .collect();
            let dofs = set.pack_dofs(&sol.u_cells[ci], &face_blocks);
            set.reconstruct(&dofs)
        })
        .collect();
    SolutionField {
        per_cell,
        method: "mshho".into(),
        space_hash: [0; 32],
    }
}

/// Uncondensed oracle: assemble the full energy system over all cell and
/// interior-face DOFs in the dual basis and solve it directly. Kept as a
/// cross-check of the condensed path, not used in production.
pub fn solve_uncondensed(
    mesh: &CoarseMesh,
    bases: &[LocalBasisSet],
    f: &[DVector<f64>],
) -> Result<MshhoSolution, MethodError> {
    let n_modes = bases[0].n_face;
    let map = InteriorFaceMap::new(mesh, n_modes);
    let n_cell = bases[0].n_cell;
    let cell_offset = |ci: usize| ci * n_cell;
    let face_offset = |slot: usize| mesh.cells.len() * n_cell + slot * n_modes;
    let size = mesh.cells.len() * n_cell + map.size();
    let mut a = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);

    for (ci, set) in bases.iter().enumerate() {
        let cell = &mesh.cells[ci];
        // Energy Gram in dual coordinates.
        let ed = set.dual.transpose() * &set.energy * &set.dual;
        // Scatter map: local DOF -> global index (None for boundary faces).
        let mut scatter: Vec<Option<usize>> = Vec::with_capacity(set.n_cols());
        for i in 0..n_cell {
            scatter.push(Some(cell_offset(ci) + i));
        }
        for (lf, &fi) in cell.faces.iter().enumerate() {
            for j in 0..n_modes {
                scatter.push(map.slot_of_face[fi].map(|s| face_offset(s) + j));
                debug_assert_eq!(set.dof_face(lf, j), scatter.len() - 1);
            }
        }
        for (la, &ga) in scatter.iter().enumerate() {
            let Some(ga) = ga else { continue };
            for (lb, &gb) in scatter.iter().enumerate() {
                let Some(gb) = gb else { continue };
                a[(ga, gb)] += ed[(la, lb)];
            }
        }
        let fr = &set.gram_cell * &f[ci];
        rhs.rows_mut(cell_offset(ci), n_cell).add_assign(&fr);
    }

    let chol = a.cholesky().ok_or(MethodError::NotSpd)?;
    let x = chol.solve(&rhs);

    let mut u_faces = SkeletonVector::zeros(mesh.faces.len(), n_modes);
    for (slot, &face) in map.faces.iter().enumerate() {
        u_faces.coeffs[face] = x.rows(face_offset(slot), n_modes).into_owned();
    }
    let u_cells = (0..mesh.cells.len())
        .map(|ci| x.rows(cell_offset(ci), n_cell).into_owned())
        .collect();
    Ok(MshhoSolution { u_faces, u_cells })
}

/// Purely face-based system: flux blocks of the face-based basis only.
pub struct FaceBasedSystem {
    pub map: InteriorFaceMap,
    pub matrix: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

pub fn assemble_face_based(
    mesh: &CoarseMesh,
    bases: &[LocalBasisSet],
) -> Result<FaceBasedSystem, MethodError> {
    let n_modes = bases[0].n_face;
    let map = InteriorFaceMap::new(mesh, n_modes);
    let size = map.size();
    let mut matrix = DMatrix::zeros(size, size);
    for (ci, set) in bases.iter().enumerate() {
        let cell = &mesh.cells[ci];
        for (lf_out, &f_out) in cell.faces.iter().enumerate() {
            let Some(slot_out) = map.slot_of_face[f_out] else {
                continue;
            };
            for (lf_in, &f_in) in cell.faces.iter().enumerate() {
                let Some(slot_in) = map.slot_of_face[f_in] else {
                    continue;
                };
                let block = &set.gram_faces[lf_out] * set.fb_m_ff(lf_out, lf_in);
                matrix
                    .view_mut((map.offset(slot_out), map.offset(slot_in)), (n_modes, n_modes))
                    .add_assign(&block);
            }
        }
    }
    let chol = matrix.clone().cholesky();
    if size > 0 && chol.is_none() {
        return Err(MethodError::NotSpd);
    }
    Ok(FaceBasedSystem { map, matrix, chol })
}

/// Face-based solve: returns the face unknowns (identical to the condensed
/// path's) and the per-cell primal coordinates of the solution.
pub fn solve_face_based(
    system: &FaceBasedSystem,
    mesh: &CoarseMesh,
    bases: &[LocalBasisSet],
    f: &[DVector<f64>],
) -> Result<(SkeletonVector, SolutionField), MethodError> {
    let n_modes = system.map.n_modes;
    let mut rhs = DVector::zeros(system.map.size());
    for (ci, set) in bases.iter().enumerate() {
        let cell = &mesh.cells[ci];
        for (lf_out, &f_out) in cell.faces.iter().enumerate() {
            let Some(slot_out) = system.map.slot_of_face[f_out] else {
                continue;
            };
            let v = &set.gram_faces[lf_out] * (set.fb_m_fk(lf_out) * &f[ci]);
            rhs.rows_mut(system.map.offset(slot_out), n_modes)
                .add_assign(&(-v));
        }
    }
    let x = if system.map.size() == 0 {
        DVector::zeros(0)
    } else {
        system
            .chol
            .as_ref()
            .ok_or(MethodError::NotSpd)?
            .solve(&rhs)
    };
    let mut u_faces = SkeletonVector::zeros(mesh.faces.len(), n_modes);
    for (slot, &face) in system.map.faces.iter().enumerate() {
        u_faces.coeffs[face] = x.rows(system.map.offset(slot), n_modes).into_owned();
    }
    let field = reconstruct_face_based(mesh, bases, &u_faces, f);
    Ok((u_faces, field))
}

/// Face-based expansion: source coefficients drive the cell functions and
/// face unknowns the face functions.
pub fn reconstruct_face_based(
    mesh: &CoarseMesh,
    bases: &[LocalBasisSet],
    u_faces: &SkeletonVector,
    f: &[DVector<f64>],
) -> SolutionField {
    let per_cell = bases
        .iter()
        .enumerate()
        .map(|(ci, set)| {
            let cell = &mesh.cells[ci];
            let face_blocks: Vec<DVector<f64>> = cell
                .faces
                .iter()
                .map(|&fi| u_faces.coeffs[fi].clone())
                .collect();
            let packed = set.pack_dofs(&f[ci], &face_blocks);
            set.combine(&(&set.face_based * packed))
        })
        .collect();
    SolutionField {
        per_cell,
        method: "mshho-facebased".into(),
        space_hash: [0; 32],
    }
}

/// Mono-query face-based route: one constrained local solve per cell lifts
/// the projected source with vanishing face moments; its boundary flux
/// replaces the offline flux blocks in the right-hand side.
pub fn solve_face_based_monoquery(
    system: &FaceBasedSystem,
    mesh: &CoarseMesh,
    fine: &FineMesh,
    coeff: &CoeffSpec,
    bases: &[LocalBasisSet],
    f: &[DVector<f64>],
) -> Result<(SkeletonVector, SolutionField), MethodError> {
    let n_modes = system.map.n_modes;
    let mut rhs = DVector::zeros(system.map.size());
    let mut liftings = Vec::with_capacity(mesh.cells.len());
    for (ci, set) in bases.iter().enumerate() {
        let space = LocalFineSpace::build(mesh, fine, ci, coeff, set.k, set.m)?;
        let load = space.polynomial_load(&f[ci]);
        let zero_moments: Vec<DVector<f64>> =
            (0..space.n_faces()).map(|_| DVector::zeros(n_modes)).collect();
        let (phi_f, flux) = space.solve_with_face_constraints(&load, &zero_moments)?;
        let cell = &mesh.cells[ci];
        for (lf_out, &f_out) in cell.faces.iter().enumerate() {
            let Some(slot_out) = system.map.slot_of_face[f_out] else {
                continue;
            };
            let v = &set.gram_faces[lf_out] * &flux[lf_out];
            rhs.rows_mut(system.map.offset(slot_out), n_modes)
                .add_assign(&(-v));
        }
        liftings.push(phi_f);
    }
    let x = if system.map.size() == 0 {
        DVector::zeros(0)
    } else {
        system
            .chol
            .as_ref()
            .ok_or(MethodError::NotSpd)?
            .solve(&rhs)
    };
    let mut u_faces = SkeletonVector::zeros(mesh.faces.len(), n_modes);
    for (slot, &face) in system.map.faces.iter().enumerate() {
        u_faces.coeffs[face] = x.rows(system.map.offset(slot), n_modes).into_owned();
    }
    let per_cell = bases
        .iter()
        .enumerate()
        .map(|(ci, set)| {
            let cell = &mesh.cells[ci];
            let face_blocks: Vec<DVector<f64>> = cell
                .faces
                .iter()
                .map(|&fi| u_faces.coeffs[fi].clone())
                .collect();
            let packed = set.pack_dofs(&DVector::zeros(set.n_cell), &face_blocks);
            set.combine(&(&set.face_based * packed)) + &liftings[ci]
        })
        .collect();
    Ok((
        u_faces,
        SolutionField {
            per_cell,
            method: "mshho-facebased-monoquery".into(),
            space_hash: [0; 32],
        },
    ))
}
