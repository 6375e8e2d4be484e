//! End-to-end checks of the two global methods and their agreement.

use hybridms::analysis::{energy_error, energy_norm, equivalence_gap};
use hybridms::local::build_all;
use hybridms::mesh::{CoarseMesh, FineMesh, Rect};
use hybridms::mhm;
use hybridms::mshho;
use hybridms::poly::dim_cell;
use hybridms::problem::{project_source, CoeffSpec, SourceTerm};
use hybridms::quad::TriangleRule;
use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

fn random_piecewise(mesh: &CoarseMesh, m: usize, seed: u64) -> SourceTerm {
    let mut rng = StdRng::seed_from_u64(seed);
    let coeffs = (0..mesh.cells.len())
        .map(|_| DVector::from_fn(dim_cell(m), |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    SourceTerm::piecewise(mesh, m, coeffs)
}

struct Setup {
    mesh: CoarseMesh,
    fine: FineMesh,
    patches: Vec<hybridms::mesh::CellPatch>,
    bases: Vec<hybridms::local::LocalBasisSet>,
    coeff: CoeffSpec,
}

fn setup(mesh: CoarseMesh, r: u32, k: usize, m: usize, coeff: CoeffSpec) -> Setup {
    let fine = FineMesh::build(&mesh, r).unwrap();
    let patches = fine.patches(&mesh);
    let bases = build_all(&mesh, &fine, &coeff, k, m, false).unwrap();
    Setup {
        mesh,
        fine,
        patches,
        bases,
        coeff,
    }
}

#[test]
fn mhm_single_cell_flux_balance() {
    let s = setup(
        CoarseMesh::structured(1, 1, Rect::UNIT).unwrap(),
        2,
        0,
        0,
        CoeffSpec::Identity,
    );
    let sys = mhm::assemble(&s.mesh, &s.bases).unwrap();
    assert_eq!(sys.size(), 1 + 4);
    let f = project_source(
        &SourceTerm::constant(1.0),
        &s.mesh,
        &s.patches,
        0,
        &TriangleRule::with_degree(4),
    );
    let sol = mhm::solve(&sys, &s.mesh, &s.bases, &f).unwrap();
    // Flux balance: sum_F int_F lambda = -int_K f (all faces are boundary,
    // sign +1, |F| = 1).
    let total: f64 = sol.lambda.coeffs.iter().map(|c| c[0]).sum();
    assert!((total + 1.0).abs() < 1e-11, "total flux {total}");
    let compat = mhm::compatibility_residuals(&s.mesh, &s.bases, &sol, &f);
    assert!(compat[0] < 1e-11);
}

#[test]
fn mhm_matrix_is_symmetric() {
    let s = setup(
        CoarseMesh::structured(2, 2, Rect::UNIT).unwrap(),
        2,
        1,
        0,
        CoeffSpec::Oscillatory { epsilon: 0.4 },
    );
    let sys = mhm::assemble(&s.mesh, &s.bases).unwrap();
    let m = &sys.matrix;
    let defect = (m - m.transpose()).amax();
    assert!(defect <= 1e-12 * m.amax(), "asymmetry {defect:.3e}");
}

#[test]
fn zero_source_gives_zero_solutions() {
    let s = setup(
        CoarseMesh::structured(2, 1, Rect::UNIT).unwrap(),
        2,
        1,
        0,
        CoeffSpec::Identity,
    );
    let f = project_source(
        &SourceTerm::zero(),
        &s.mesh,
        &s.patches,
        0,
        &TriangleRule::with_degree(4),
    );
    let sys = mhm::assemble(&s.mesh, &s.bases).unwrap();
    let sol = mhm::solve(&sys, &s.mesh, &s.bases, &f).unwrap();
    assert!(sol.u0.amax() == 0.0 && sol.lambda.norm() == 0.0);
    let field = mhm::reconstruct(&s.mesh, &s.bases, &sol, &f);
    assert!(energy_norm(&s.patches, &s.coeff, &field) == 0.0);

    let csys = mshho::assemble_condensed(&s.mesh, &s.bases).unwrap();
    let csol = mshho::solve_condensed(&csys, &s.mesh, &s.bases, &f).unwrap();
    let cfield = mshho::reconstruct(&s.mesh, &s.bases, &csol);
    assert!(energy_norm(&s.patches, &s.coeff, &cfield) == 0.0);

    let gap = equivalence_gap(&s.patches, &s.coeff, &field, &cfield).unwrap();
    assert_eq!(gap, 0.0);
}

#[test]
fn condensed_system_size_and_spd() {
    let s = setup(
        CoarseMesh::structured(2, 1, Rect::UNIT).unwrap(),
        2,
        1,
        0,
        CoeffSpec::Identity,
    );
    let sys = mshho::assemble_condensed(&s.mesh, &s.bases).unwrap();
    assert_eq!(sys.matrix.nrows(), 2); // one interior face, two modes
    let defect = (&sys.matrix - sys.matrix.transpose()).amax();
    assert!(defect <= 1e-12 * sys.matrix.amax());
}

#[test]
fn mhm_solution_cell_averages_match_u0() {
    let s = setup(
        CoarseMesh::structured(2, 2, Rect::UNIT).unwrap(),
        2,
        1,
        0,
        CoeffSpec::Identity,
    );
    let f = project_source(
        &SourceTerm::sin_pi_pi(1.0),
        &s.mesh,
        &s.patches,
        0,
        &TriangleRule::with_degree(10),
    );
    let sys = mhm::assemble(&s.mesh, &s.bases).unwrap();
    let sol = mhm::solve(&sys, &s.mesh, &s.bases, &f).unwrap();
    let field = mhm::reconstruct(&s.mesh, &s.bases, &sol, &f);
    // All non-constant basis columns have zero mean, so the cell average of
    // the reconstruction is u0.
    for ci in 0..s.mesh.cells.len() {
        let space = hybridms::local::LocalFineSpace::build(
            &s.mesh, &s.fine, ci, &s.coeff, 1, 0,
        )
        .unwrap();
        let avg = space.mean(&field.per_cell[ci]);
        assert!((avg - sol.u0[ci]).abs() < 1e-11);
    }
}

#[test]
fn multi_query_reuses_factorization_exactly() {
    let s = setup(
        CoarseMesh::structured(3, 3, Rect::UNIT).unwrap(),
        2,
        1,
        0,
        CoeffSpec::Identity,
    );
    let sys = mhm::assemble(&s.mesh, &s.bases).unwrap();
    for seed in 0..10 {
        let src = random_piecewise(&s.mesh, 0, seed);
        let f = project_source(&src, &s.mesh, &s.patches, 0, &TriangleRule::with_degree(4));
        let reused = mhm::solve(&sys, &s.mesh, &s.bases, &f).unwrap();
        let fresh_sys = mhm::assemble(&s.mesh, &s.bases).unwrap();
        let fresh = mhm::solve(&fresh_sys, &s.mesh, &s.bases, &f).unwrap();
        let du = (&reused.u0 - &fresh.u0).amax();
        assert!(du <= 1e-12 * reused.u0.amax().max(1.0));
        for (a, b) in reused.lambda.coeffs.iter().zip(&fresh.lambda.coeffs) {
            assert!((a - b).amax() <= 1e-12 * reused.lambda.norm().max(1.0));
        }
    }
}

#[test]
fn equivalence_on_structured_mesh() {
    for (k, m) in [(0usize, 0usize), (1, 0), (2, 1)] {
        let s = setup(
            CoarseMesh::structured(3, 3, Rect::UNIT).unwrap(),
            2,
            k,
            m,
            CoeffSpec::Identity,
        );
        let src = random_piecewise(&s.mesh, m, 99 + k as u64);
        let f = project_source(&src, &s.mesh, &s.patches, m, &TriangleRule::with_degree(8));

        let sys = mhm::assemble(&s.mesh, &s.bases).unwrap();
        let sol = mhm::solve(&sys, &s.mesh, &s.bases, &f).unwrap();
        let u_mhm = mhm::reconstruct(&s.mesh, &s.bases, &sol, &f);

        let csys = mshho::assemble_condensed(&s.mesh, &s.bases).unwrap();
        let csol = mshho::solve_condensed(&csys, &s.mesh, &s.bases, &f).unwrap();
        let u_hho = mshho::reconstruct(&s.mesh, &s.bases, &csol);

        let gap = equivalence_gap(&s.patches, &s.coeff, &u_mhm, &u_hho).unwrap();
        assert!(gap <= 1e-9, "k={k} m={m} gap {gap:.3e}");
    }
}

#[test]
fn three_mshho_paths_agree() {
    let s = setup(
        CoarseMesh::structured(3, 2, Rect::UNIT).unwrap(),
        2,
        1,
        0,
        CoeffSpec::Contrast { ratio: 100.0, blocks: 3 },
    );
    let src = random_piecewise(&s.mesh, 0, 7);
    let f = project_source(&src, &s.mesh, &s.patches, 0, &TriangleRule::with_degree(8));

    let csys = mshho::assemble_condensed(&s.mesh, &s.bases).unwrap();
    let csol = mshho::solve_condensed(&csys, &s.mesh, &s.bases, &f).unwrap();
    let u_cond = mshho::reconstruct(&s.mesh, &s.bases, &csol);

    let usol = mshho::solve_uncondensed(&s.mesh, &s.bases, &f).unwrap();
    let u_unc = mshho::reconstruct(&s.mesh, &s.bases, &usol);

    let fsys = mshho::assemble_face_based(&s.mesh, &s.bases).unwrap();
    let (fb_faces, u_fb) = mshho::solve_face_based(&fsys, &s.mesh, &s.bases, &f).unwrap();

    let norm = energy_norm(&s.patches, &s.coeff, &u_cond);
    let e1 = energy_error(&s.patches, &s.coeff, &u_cond, &u_unc).unwrap();
    let e2 = energy_error(&s.patches, &s.coeff, &u_cond, &u_fb).unwrap();
    let e3 = energy_error(&s.patches, &s.coeff, &u_unc, &u_fb).unwrap();
    assert!(e1 <= 1e-10 * norm.max(1.0), "cond vs unc {e1:.3e}");
    assert!(e2 <= 1e-10 * norm.max(1.0), "cond vs fb {e2:.3e}");
    assert!(e3 <= 1e-10 * norm.max(1.0), "unc vs fb {e3:.3e}");
    // Face unknowns agree across paths too.
    for fi in s.mesh.interior_faces() {
        assert!((&csol.u_faces.coeffs[fi] - &fb_faces.coeffs[fi]).amax() < 1e-10);
        assert!((&csol.u_faces.coeffs[fi] - &usol.u_faces.coeffs[fi]).amax() < 1e-10);
    }
}

#[test]
fn monoquery_paths_match_expansions() {
    let s = setup(
        CoarseMesh::structured(2, 2, Rect::UNIT).unwrap(),
        2,
        1,
        0,
        CoeffSpec::Oscillatory { epsilon: 0.5 },
    );
    let src = SourceTerm::sin_pi_pi(1.0);
    let f = project_source(&src, &s.mesh, &s.patches, 0, &TriangleRule::with_degree(12));

    // MHM: reconstruction via one extra local solve per cell.
    let sys = mhm::assemble(&s.mesh, &s.bases).unwrap();
    let sol = mhm::solve(&sys, &s.mesh, &s.bases, &f).unwrap();
    let multi = mhm::reconstruct(&s.mesh, &s.bases, &sol, &f);
    let mono = mhm::reconstruct_monoquery(&s.mesh, &s.fine, &s.coeff, &s.bases, &sol, &f).unwrap();
    let e = energy_error(&s.patches, &s.coeff, &multi, &mono).unwrap();
    let norm = energy_norm(&s.patches, &s.coeff, &multi);
    assert!(e <= 1e-11 * norm.max(1.0), "mhm mono vs multi {e:.3e}");

    // Fully mono-query online stage reproduces the same solution.
    let (sol2, mono2) =
        mhm::solve_monoquery(&sys, &s.mesh, &s.fine, &s.coeff, &s.bases, &src).unwrap();
    assert!((&sol2.u0 - &sol.u0).amax() < 1e-10);
    let e = energy_error(&s.patches, &s.coeff, &multi, &mono2).unwrap();
    assert!(e <= 1e-10 * norm.max(1.0), "mhm full-mono {e:.3e}");

    // Face-based MsHHO mono-query.
    let fsys = mshho::assemble_face_based(&s.mesh, &s.bases).unwrap();
    let (faces_multi, fb_multi) = mshho::solve_face_based(&fsys, &s.mesh, &s.bases, &f).unwrap();
    let (faces_mono, fb_mono) =
        mshho::solve_face_based_monoquery(&fsys, &s.mesh, &s.fine, &s.coeff, &s.bases, &f)
            .unwrap();
    for fi in s.mesh.interior_faces() {
        assert!((&faces_multi.coeffs[fi] - &faces_mono.coeffs[fi]).amax() < 1e-10);
    }
    let e = energy_error(&s.patches, &s.coeff, &fb_multi, &fb_mono).unwrap();
    assert!(e <= 1e-10 * norm.max(1.0), "fb mono vs multi {e:.3e}");
}
