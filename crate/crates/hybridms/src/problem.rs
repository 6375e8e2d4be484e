//! Problem data: diffusion coefficients, source terms, and degrees.

use nalgebra::{DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::mesh::{CellPatch, CoarseMesh, FineMesh, Point};
use crate::poly::CellPolyBasis;
use crate::quad::TriangleRule;

/// Diffusion coefficient choices. All are symmetric positive definite
/// pointwise; the solvers sample the tensor at fine-triangle centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoeffSpec {
    Identity,
    Scalar {
        value: f64,
    },
    /// Constant symmetric tensor [[a11, a12], [a12, a22]].
    Anisotropic {
        a11: f64,
        a12: f64,
        a22: f64,
    },
    /// a(x, y) = (2 + sin(2 pi x / eps)) (2 + sin(2 pi y / eps)) times the
    /// identity.
    Oscillatory {
        epsilon: f64,
    },
    /// Checkerboard of `blocks` x `blocks` tiles on the unit square with
    /// scalar values `ratio` and 1.
    Contrast {
        ratio: f64,
        blocks: usize,
    },
}

impl CoeffSpec {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            CoeffSpec::Scalar { value } if value <= 0.0 => {
                Err(format!("scalar coefficient must be positive, got {value}"))
            }
            CoeffSpec::Anisotropic { a11, a12, a22 } => {
                if a11 <= 0.0 || a11 * a22 - a12 * a12 <= 0.0 {
                    Err("anisotropic tensor is not positive definite".into())
                } else {
                    Ok(())
                }
            }
            CoeffSpec::Oscillatory { epsilon } if epsilon <= 0.0 => {
                Err(format!("oscillation period must be positive, got {epsilon}"))
            }
            CoeffSpec::Contrast { ratio, blocks } => {
                if ratio <= 0.0 {
                    Err(format!("contrast ratio must be positive, got {ratio}"))
                } else if blocks == 0 {
                    Err("contrast pattern needs at least one block".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Tensor value at a point.
    pub fn tensor_at(&self, p: Point) -> Matrix2<f64> {
        match *self {
            CoeffSpec::Identity => Matrix2::identity(),
            CoeffSpec::Scalar { value } => Matrix2::identity() * value,
            CoeffSpec::Anisotropic { a11, a12, a22 } => Matrix2::new(a11, a12, a12, a22),
            CoeffSpec::Oscillatory { epsilon } => {
                let tau = 2.0 * std::f64::consts::PI / epsilon;
                let a = (2.0 + (tau * p.x).sin()) * (2.0 + (tau * p.y).sin());
                Matrix2::identity() * a
            }
            CoeffSpec::Contrast { ratio, blocks } => {
                let n = blocks as f64;
                let ix = (p.x * n).floor().clamp(0.0, n - 1.0) as i64;
                let iy = (p.y * n).floor().clamp(0.0, n - 1.0) as i64;
                let a = if (ix + iy) % 2 == 0 { ratio } else { 1.0 };
                Matrix2::identity() * a
            }
        }
    }

    /// Smallest eigenvalue of the tensor at a point.
    pub fn min_eigenvalue_at(&self, p: Point) -> f64 {
        let a = self.tensor_at(p);
        let tr = a[(0, 0)] + a[(1, 1)];
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt())
    }

    /// Smallest coefficient eigenvalue over the fine triangles of one cell
    /// (sampled at centroids, matching the solver's piecewise-constant view).
    pub fn min_eigenvalue_in_cell(&self, fine: &FineMesh, cell: usize) -> f64 {
        fine.cell_triangles[cell]
            .iter()
            .map(|&t| self.min_eigenvalue_at(fine.centroid(t)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Canonical byte encoding for content hashing.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match *self {
            CoeffSpec::Identity => out.push(0u8),
            CoeffSpec::Scalar { value } => {
                out.push(1);
                out.extend(value.to_le_bytes());
            }
            CoeffSpec::Anisotropic { a11, a12, a22 } => {
                out.push(2);
                out.extend(a11.to_le_bytes());
                out.extend(a12.to_le_bytes());
                out.extend(a22.to_le_bytes());
            }
            CoeffSpec::Oscillatory { epsilon } => {
                out.push(3);
                out.extend(epsilon.to_le_bytes());
            }
            CoeffSpec::Contrast { ratio, blocks } => {
                out.push(4);
                out.extend(ratio.to_le_bytes());
                out.extend((blocks as u64).to_le_bytes());
            }
        }
        out
    }
}

/// Degrees of the discretization: `k` on faces, `m` in cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degrees {
    pub k: usize,
    pub m: usize,
}

impl Degrees {
    /// The conventional pairing m = k - 1 (m = 0 when k = 0).
    pub fn standard(k: usize) -> Self {
        Degrees {
            k,
            m: k.saturating_sub(1),
        }
    }

    pub fn new(k: usize, m: Option<usize>) -> Self {
        match m {
            Some(m) => Degrees { k, m },
            None => Self::standard(k),
        }
    }
}

/// Full problem description shared by all experiments.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub coeff: CoeffSpec,
    pub degrees: Degrees,
}

/// A realized source term: evaluable per cell at physical points.
pub struct SourceTerm {
    eval: Box<dyn Fn(usize, Point) -> f64 + Sync + Send>,
    pub label: String,
}

impl SourceTerm {
    pub fn from_field(label: impl Into<String>, f: impl Fn(Point) -> f64 + Sync + Send + 'static) -> Self {
        SourceTerm {
            eval: Box::new(move |_, p| f(p)),
            label: label.into(),
        }
    }

    /// Piecewise polynomial with the given coefficient vector per cell, on
    /// the per-cell scaled monomial bases of the given degree.
    pub fn piecewise(mesh: &CoarseMesh, degree: usize, coeffs: Vec<DVector<f64>>) -> Self {
        assert_eq!(coeffs.len(), mesh.cells.len());
        let bases: Vec<CellPolyBasis> = (0..mesh.cells.len())
            .map(|c| CellPolyBasis::for_cell(mesh, c, degree))
            .collect();
        SourceTerm {
            eval: Box::new(move |cell, p| bases[cell].eval_poly(&coeffs[cell], p)),
            label: format!("piecewise-p{degree}"),
        }
    }

    pub fn zero() -> Self {
        SourceTerm::from_field("zero", |_| 0.0)
    }

    pub fn constant(c: f64) -> Self {
        SourceTerm::from_field(format!("constant-{c}"), move |_| c)
    }

    /// f(x, y) = amplitude * sin(pi x) sin(pi y).
    pub fn sin_pi_pi(amplitude: f64) -> Self {
        SourceTerm::from_field("sin-pi-pi", move |p: Point| {
            amplitude * (std::f64::consts::PI * p.x).sin() * (std::f64::consts::PI * p.y).sin()
        })
    }

    pub fn value(&self, cell: usize, p: Point) -> f64 {
        (self.eval)(cell, p)
    }
}

/// Coefficients of the L2 projection of a source onto P^m of each cell.
///
/// This is the single entry point both global methods use to see the source,
/// so their right-hand sides are built from bitwise-identical data.
pub fn project_source(
    source: &SourceTerm,
    mesh: &CoarseMesh,
    patches: &[CellPatch],
    m: usize,
    rule: &TriangleRule,
) -> Vec<DVector<f64>> {
    (0..mesh.cells.len())
        .map(|c| {
            let basis = CellPolyBasis::for_cell(mesh, c, m);
            crate::poly::project_cell(&|p| source.value(c, p), &patches[c], &basis, rule)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use rand::rngs::StdRng;
    use rand::{RngExt, SeedableRng};

    #[test]
    fn coefficient_fields_are_spd() {
        let specs = [
            CoeffSpec::Identity,
            CoeffSpec::Scalar { value: 2.5 },
            CoeffSpec::Anisotropic { a11: 4.0, a12: 1.0, a22: 2.0 },
            CoeffSpec::Oscillatory { epsilon: 0.3 },
            CoeffSpec::Contrast { ratio: 100.0, blocks: 4 },
        ];
        let mut rng = StdRng::seed_from_u64(1);
        for spec in &specs {
            spec.validate().unwrap();
            for _ in 0..50 {
                let p = Point::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
                assert!(spec.min_eigenvalue_at(p) > 0.0, "{spec:?} at {p:?}");
            }
        }
        assert!(CoeffSpec::Oscillatory { epsilon: -1.0 }.validate().is_err());
        assert!(CoeffSpec::Contrast { ratio: 0.0, blocks: 4 }.validate().is_err());
    }

    #[test]
    fn projecting_piecewise_source_recovers_coefficients() {
        let mesh = CoarseMesh::structured(2, 2, Rect::UNIT).unwrap();
        let fine = FineMesh::build(&mesh, 2).unwrap();
        let patches = fine.patches(&mesh);
        let m = 1;
        let mut rng = StdRng::seed_from_u64(7);
        let coeffs: Vec<DVector<f64>> = (0..4)
            .map(|_| DVector::from_fn(crate::poly::dim_cell(m), |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let src = SourceTerm::piecewise(&mesh, m, coeffs.clone());
        let proj = project_source(&src, &mesh, &patches, m, &TriangleRule::with_degree(6));
        for (a, b) in proj.iter().zip(&coeffs) {
            assert!((a - b).amax() < 1e-12);
        }
    }
}
