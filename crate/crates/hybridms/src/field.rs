//! Solution fields: per-cell fine nodal values, discontinuous across coarse
//! faces.

use nalgebra::DVector;

use crate::mesh::CellPatch;

/// A discrete solution, stored cell by cell in patch-local node order.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub per_cell: Vec<DVector<f64>>,
    /// Which pipeline produced the field (for reports and exports).
    pub method: String,
    /// Content hash of the local space (mesh + coefficient + degrees +
    /// refinement); all-zero when unknown. Fields from different local
    /// spaces must not be compared.
    pub space_hash: [u8; 32],
}

impl SolutionField {
    pub fn zeros(patches: &[CellPatch], method: impl Into<String>) -> Self {
        SolutionField {
            per_cell: patches.iter().map(|p| DVector::zeros(p.n_nodes())).collect(),
            method: method.into(),
            space_hash: [0; 32],
        }
    }

    pub fn with_hash(mut self, hash: [u8; 32]) -> Self {
        self.space_hash = hash;
        self
    }

    /// Pointwise difference (same mesh and patch layout required).
    pub fn diff(&self, other: &SolutionField) -> SolutionField {
        assert_eq!(self.per_cell.len(), other.per_cell.len());
        SolutionField {
            per_cell: self
                .per_cell
                .iter()
                .zip(&other.per_cell)
                .map(|(a, b)| a - b)
                .collect(),
            method: format!("{}-{}", self.method, other.method),
            space_hash: self.space_hash,
        }
    }

    /// CSV export: `cell,node_x,node_y,value` rows, cells then local nodes in
    /// ascending order (deterministic).
    pub fn to_csv(&self, patches: &[CellPatch]) -> String {
        let mut out = String::from("cell,node_x,node_y,value\n");
        for (ci, vals) in self.per_cell.iter().enumerate() {
            let patch = &patches[ci];
            for i in 0..patch.n_nodes() {
                let p = patch.coords[i];
                out.push_str(&format!("{ci},{:.17e},{:.17e},{:.17e}\n", p.x, p.y, vals[i]));
            }
        }
        out
    }

    /// Restrict a global fine nodal vector to per-cell patch layout.
    pub fn from_global(
        global: &DVector<f64>,
        patches: &[CellPatch],
        method: impl Into<String>,
    ) -> Self {
        SolutionField {
            per_cell: patches
                .iter()
                .map(|p| DVector::from_fn(p.n_nodes(), |i, _| global[p.node_ids[i]]))
                .collect(),
            method: method.into(),
            space_hash: [0; 32],
        }
    }
}

/// One polynomial coefficient block per coarse face.
///
/// Interface single-valuedness is structural: there is one block per face,
/// and the trace seen from a cell K is sign(K, F) times the stored block for
/// flux-type quantities, or the block itself for moment-type quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonVector {
    pub n_modes: usize,
    pub coeffs: Vec<DVector<f64>>,
}

impl SkeletonVector {
    pub fn zeros(n_faces: usize, n_modes: usize) -> Self {
        SkeletonVector {
            n_modes,
            coeffs: (0..n_faces).map(|_| DVector::zeros(n_modes)).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt()
    }

    /// CSV export: `face,j,value`.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = format!("face,j,{header}\n");
        for (f, c) in self.coeffs.iter().enumerate() {
            for j in 0..c.len() {
                out.push_str(&format!("{f},{j},{:.17e}\n", c[j]));
            }
        }
        out
    }
}

/// Helper shared by exports: write a string to a file, creating parents.
pub fn write_text(path: &std::path::Path, text: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)
}
