//! Invariant audits: jump-moment orthogonality of the solution across every
//! face, the per-cell weak Neumann identity, the MHM flux-source balance, and
//! the MsHHO divergence identity and interface flux-moment continuity. The
//! audit records residuals and pass/fail flags; it never aborts.

use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use serde::Serialize;

use super::energy_norm;
use crate::field::SolutionField;
use crate::local::{LocalBasisSet, LocalFineSpace};
use crate::mesh::{CellPatch, CoarseMesh, FineMesh};
use crate::mhm::MhmSolution;
use crate::mshho::MshhoSolution;
use crate::poly::{face_trace_moments, FacePolyBasis};
use crate::problem::CoeffSpec;
use crate::quad::SegmentRule;

/// Residual tolerances for the audit categories.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AuditTolerances {
    /// Jump moments, relative to the solution energy norm.
    pub jump: f64,
    /// Weak Neumann identity per cell, against random unit test functions.
    pub neumann: f64,
    /// MHM per-cell flux-source balance.
    pub compatibility: f64,
    /// MsHHO divergence identity (coefficients of -div(A grad u) vs source).
    pub divergence: f64,
    /// MsHHO interface flux-moment continuity.
    pub flux_continuity: f64,
}

impl Default for AuditTolerances {
    fn default() -> Self {
        AuditTolerances {
            jump: 1e-10,
            neumann: 1e-10,
            compatibility: 1e-11,
            divergence: 1e-10,
            flux_continuity: 1e-10,
        }
    }
}

/// Audit outcome; every residual is recorded together with the tolerance
/// verdict.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub method: String,
    pub energy: f64,
    /// Largest jump-moment residual over faces and modes, raw and relative.
    pub jump_raw: f64,
    pub jump_relative: f64,
    /// Largest weak-identity residual over cells and random test functions.
    pub neumann: f64,
    /// MHM: largest flux-source balance defect over cells (normalized).
    pub compatibility: Option<f64>,
    /// MsHHO: largest divergence-coefficient defect over cells (normalized).
    pub divergence: Option<f64>,
    /// MsHHO: largest interface flux-moment continuity defect (normalized).
    pub flux_continuity: Option<f64>,
    pub pass: bool,
}

/// Jump moments of the field against every face polynomial basis, maximal
/// over faces and modes.
fn max_jump_residual(
    mesh: &CoarseMesh,
    patches: &[CellPatch],
    field: &SolutionField,
    k: usize,
) -> f64 {
    let rule = SegmentRule::with_degree(2 * k + 2);
    let mut worst: f64 = 0.0;
    for (fi, face) in mesh.faces.iter().enumerate() {
        let basis = FacePolyBasis::for_face(mesh, fi, k);
        let mut moments = DVector::zeros(basis.dim());
        for ci in face.adjacent() {
            let lf = mesh.cells[ci].faces.iter().position(|&f| f == fi).unwrap();
            let sign = mesh.cells[ci].signs[lf];
            let m = face_trace_moments(&field.per_cell[ci], &patches[ci], lf, &basis, &rule);
            moments.axpy(sign, &m, 1.0);
        }
        worst = worst.max(moments.amax());
    }
    worst
}

/// Weak Neumann identity per cell against random unit-norm test functions:
/// (A grad u, grad v)_K - (Pi^m f, v)_K - <flux, v>_dK.
#[allow(clippy::too_many_arguments)]
fn max_neumann_residual(
    mesh: &CoarseMesh,
    fine: &FineMesh,
    coeff: &CoeffSpec,
    bases: &[LocalBasisSet],
    field: &SolutionField,
    f: &[DVector<f64>],
    flux_of_cell: impl Fn(usize, &LocalBasisSet, usize) -> DVector<f64>,
    n_random: usize,
    seed: u64,
) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (ci, set) in bases.iter().enumerate() {
        let space = LocalFineSpace::build(mesh, fine, ci, coeff, set.k, set.m)
            .expect("audit rebuilds local spaces");
        let u = &field.per_cell[ci];
        let f_load = space.polynomial_load(&f[ci]);
        for _ in 0..n_random {
            let mut v = DVector::from_fn(space.n_nodes(), |_, _| rng.random_range(-1.0_f64..1.0));
            v /= v.norm();
            let mut r = space.energy_product(u, &v) - f_load.dot(&v);
            for lf in 0..space.n_faces() {
                let mu = flux_of_cell(ci, set, lf);
                r -= (&space.face_moments[lf] * &v).dot(&mu);
            }
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Audit an MHM solution.
#[allow(clippy::too_many_arguments)]
pub fn audit_mhm(
    mesh: &CoarseMesh,
    fine: &FineMesh,
    patches: &[CellPatch],
    coeff: &CoeffSpec,
    bases: &[LocalBasisSet],
    sol: &MhmSolution,
    f: &[DVector<f64>],
    field: &SolutionField,
    tol: &AuditTolerances,
) -> AuditReport {
    let energy = energy_norm(patches, coeff, field);
    let k = bases[0].k;
    let jump_raw = max_jump_residual(mesh, patches, field, k);
    let jump_relative = jump_raw / energy.max(1e-300);
    let neumann = max_neumann_residual(
        mesh,
        fine,
        coeff,
        bases,
        field,
        f,
        |ci, _set, lf| {
            let fi = mesh.cells[ci].faces[lf];
            let s = mesh.cells[ci].signs[lf];
            sol.lambda.coeffs[fi].clone() * s
        },
        8,
        20_000 + mesh.cells.len() as u64,
    );
    let compat = crate::mhm::compatibility_residuals(mesh, bases, sol, f)
        .into_iter()
        .fold(0.0_f64, f64::max);
    let pass = (energy == 0.0 || jump_relative <= tol.jump)
        && neumann <= tol.neumann
        && compat <= tol.compatibility;
    AuditReport {
        method: "mhm".into(),
        energy,
        jump_raw,
        jump_relative,
        neumann,
        compatibility: Some(compat),
        divergence: None,
        flux_continuity: None,
        pass,
    }
}

/// Audit an MsHHO solution: the multiplier data of the assembled solution
/// must satisfy the divergence identity inside cells and flux-moment
/// continuity across interfaces.
#[allow(clippy::too_many_arguments)]
pub fn audit_mshho(
    mesh: &CoarseMesh,
    fine: &FineMesh,
    patches: &[CellPatch],
    coeff: &CoeffSpec,
    bases: &[LocalBasisSet],
    sol: &MshhoSolution,
    f: &[DVector<f64>],
    field: &SolutionField,
    tol: &AuditTolerances,
) -> AuditReport {
    let energy = energy_norm(patches, coeff, field);
    let k = bases[0].k;
    let jump_raw = max_jump_residual(mesh, patches, field, k);
    let jump_relative = jump_raw / energy.max(1e-300);

    // Primal coordinates of the solution per cell.
    let coords: Vec<DVector<f64>> = bases
        .iter()
        .enumerate()
        .map(|(ci, set)| {
            let cell = &mesh.cells[ci];
            let face_blocks: Vec<DVector<f64>> = cell
                .faces
                .iter()
                .map(|&fi| sol.u_faces.coeffs[fi].clone())
                .collect();
            &set.dual * set.pack_dofs(&sol.u_cells[ci], &face_blocks)
        })
        .collect();

    // Divergence identity: -div(A grad u)|_K = Pi^m f as polynomials.
    let mut divergence: f64 = 0.0;
    for (ci, set) in bases.iter().enumerate() {
        let gamma = set.divergence_of(&coords[ci]);
        let defect = (&gamma - &f[ci]).amax() / (1.0 + f[ci].amax());
        divergence = divergence.max(defect);
    }

    // Flux-moment continuity across interfaces: outward fluxes cancel.
    let mut flux_continuity: f64 = 0.0;
    for fi in mesh.interior_faces() {
        let face = &mesh.faces[fi];
        let mut total = DVector::zeros(bases[0].n_face);
        let mut scale: f64 = 0.0;
        for ci in face.adjacent() {
            let lf = mesh.cells[ci].faces.iter().position(|&f| f == fi).unwrap();
            let mu = bases[ci].flux_of(&coords[ci], lf);
            scale = scale.max(mu.amax());
            total += mu;
        }
        flux_continuity = flux_continuity.max(total.amax() / (1.0 + scale));
    }

    let neumann = max_neumann_residual(
        mesh,
        fine,
        coeff,
        bases,
        field,
        f,
        |ci, set, lf| set.flux_of(&coords[ci], lf),
        8,
        40_000 + mesh.cells.len() as u64,
    );

    let pass = (energy == 0.0 || jump_relative <= tol.jump)
        && neumann <= tol.neumann
        && divergence <= tol.divergence
        && flux_continuity <= tol.flux_continuity;
    AuditReport {
        method: "mshho".into(),
        energy,
        jump_raw,
        jump_relative,
        neumann,
        compatibility: None,
        divergence: Some(divergence),
        flux_continuity: Some(flux_continuity),
        pass,
    }
}
