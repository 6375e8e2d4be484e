//! Convergence-rate studies against the global fine reference solution.

use serde::Serialize;

use super::reference::{prolong, solve_reference};
use super::{energy_error, AnalysisError};
use crate::field::SolutionField;
use crate::local::build_all;
use crate::mesh::{CoarseMesh, FineMesh, Rect};
use crate::problem::{project_source, CoeffSpec, SourceTerm};
use crate::quad::TriangleRule;

#[derive(Debug, Clone, Serialize)]
pub struct StudyPoint {
    pub divisions: usize,
    pub h: f64,
    pub error: f64,
    /// Whether the point sits above the fine-scale floor and entered the fit.
    pub used: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub k: usize,
    pub m: usize,
    pub refinement: u32,
    pub points: Vec<StudyPoint>,
    /// Fine-scale error floor: the finest-H run measured against a reference
    /// with doubled fine resolution (one extra refinement level).
    pub floor: f64,
    /// Least-squares slope of log error vs log H over the used points;
    /// absent when fewer than 3 points clear the floor.
    pub slope: Option<f64>,
    pub conclusive: bool,
}

/// Run one convergence study: for each division count, solve on the
/// structured mesh with fixed fine-to-coarse refinement and measure the
/// energy error against the global fine reference.
pub fn convergence_study(
    k: usize,
    m: usize,
    coeff: &CoeffSpec,
    source: &SourceTerm,
    divisions: &[usize],
    refinement: u32,
    domain: Rect,
) -> Result<StudyReport, AnalysisError> {
    let mut have: Vec<(usize, f64, f64)> = Vec::new();
    let mut finest: Option<(CoarseMesh, FineMesh, SolutionField)> = None;
    for &n in divisions {
        let mesh = CoarseMesh::structured(n, n, domain)
            .map_err(|e| AnalysisError::Other(e.to_string()))?;
        let fine = FineMesh::build(&mesh, refinement)
            .map_err(|e| AnalysisError::Other(e.to_string()))?;
        let patches = fine.patches(&mesh);
        let bases = build_all(&mesh, &fine, coeff, k, m, true)
            .map_err(|e| AnalysisError::Other(e.to_string()))?;
        let f = project_source(source, &mesh, &patches, m, &TriangleRule::with_degree(12));
        let system =
            crate::mhm::assemble(&mesh, &bases).map_err(|e| AnalysisError::Other(e.to_string()))?;
        let sol = crate::mhm::solve(&system, &mesh, &bases, &f)
            .map_err(|e| AnalysisError::Other(e.to_string()))?;
        let field = crate::mhm::reconstruct(&mesh, &bases, &sol, &f);
        let reference = solve_reference(&mesh, &fine, coeff, source);
        let ref_field = reference.as_field(&mesh, &fine);
        let err = energy_error(&patches, coeff, &field, &ref_field)?;
        have.push((n, mesh.h_max(), err));
        finest = Some((mesh, fine, field));
    }

    // Floor estimate: finest multiscale run against a doubled-resolution
    // reference.
    let (mesh, fine, field) = finest.expect("at least one division");
    let fine2 = FineMesh::build(&mesh, refinement + 1)
        .map_err(|e| AnalysisError::Other(e.to_string()))?;
    let lifted = prolong(&mesh, &fine, &field, &fine2);
    let ref2 = solve_reference(&mesh, &fine2, coeff, source);
    let ref2_field = ref2.as_field(&mesh, &fine2);
    let floor = energy_error(&fine2.patches(&mesh), coeff, &lifted, &ref2_field)?;

    let points: Vec<StudyPoint> = have
        .iter()
        .map(|&(n, h, e)| StudyPoint {
            divisions: n,
            h,
            error: e,
            used: e > 10.0 * floor,
        })
        .collect();
    let used: Vec<&StudyPoint> = points.iter().filter(|p| p.used).collect();
    let slope = if used.len() >= 3 {
        Some(fit_slope(
            &used.iter().map(|p| p.h.ln()).collect::<Vec<_>>(),
            &used.iter().map(|p| p.error.ln()).collect::<Vec<_>>(),
        ))
    } else {
        None
    };
    Ok(StudyReport {
        k,
        m,
        refinement,
        points,
        floor,
        slope,
        conclusive: slope.is_some(),
    })
}

/// Error of the multiscale solution at several fine refinements and a fixed
/// coarse mesh, measured against one deep reference. The error decreases
/// with the fine resolution until the coarse-scale error takes over.
pub fn refinement_sweep(
    k: usize,
    m: usize,
    coeff: &CoeffSpec,
    source: &SourceTerm,
    divisions: usize,
    refinements: &[u32],
    reference_refinement: u32,
    domain: Rect,
) -> Result<Vec<(u32, f64)>, AnalysisError> {
    let mesh = CoarseMesh::structured(divisions, divisions, domain)
        .map_err(|e| AnalysisError::Other(e.to_string()))?;
    let fine_ref = FineMesh::build(&mesh, reference_refinement)
        .map_err(|e| AnalysisError::Other(e.to_string()))?;
    let reference = solve_reference(&mesh, &fine_ref, coeff, source);
    let ref_field = reference.as_field(&mesh, &fine_ref);
    let ref_patches = fine_ref.patches(&mesh);

    let mut out = Vec::new();
    for &r in refinements {
        let fine = FineMesh::build(&mesh, r).map_err(|e| AnalysisError::Other(e.to_string()))?;
        let patches = fine.patches(&mesh);
        let bases = build_all(&mesh, &fine, coeff, k, m, true)
            .map_err(|e| AnalysisError::Other(e.to_string()))?;
        let f = project_source(source, &mesh, &patches, m, &TriangleRule::with_degree(12));
        let system =
            crate::mhm::assemble(&mesh, &bases).map_err(|e| AnalysisError::Other(e.to_string()))?;
        let sol = crate::mhm::solve(&system, &mesh, &bases, &f)
            .map_err(|e| AnalysisError::Other(e.to_string()))?;
        let field = crate::mhm::reconstruct(&mesh, &bases, &sol, &f);
        let lifted = prolong(&mesh, &fine, &field, &fine_ref);
        let err = energy_error(&ref_patches, coeff, &lifted, &ref_field)?;
        out.push((r, err));
    }
    Ok(out)
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let xb = x.iter().sum::<f64>() / n;
    let yb = y.iter().sum::<f64>() / n;
    let num: f64 = x.iter().zip(y).map(|(&a, &b)| (a - xb) * (b - yb)).sum();
    let den: f64 = x.iter().map(|&a| (a - xb) * (a - xb)).sum();
    num / den
}
