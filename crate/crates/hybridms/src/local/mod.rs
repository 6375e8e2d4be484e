//! Per-cell fine-scale solves and the local multiscale basis families.
//!
//! One discrete local space is built per coarse cell as the span of the
//! primal basis: the constant, source liftings of the cell polynomials and
//! flux liftings of the face polynomials, all computed on the cell's fine P1
//! space. The dual basis (unit cell/face moments, the MsHHO ingredients) and
//! the purely face-based basis (prescribed divergence, vanishing face
//! moments) are changes of basis inside that span, so every global method
//! assembled downstream operates on exactly the same discrete space.

mod basis;
mod space;

pub use basis::{build_all, build_basis_set, LocalBasisSet, UNISOLVENCE_COND_LIMIT};
pub use space::{LocalFineSpace, LocalSolveError};
