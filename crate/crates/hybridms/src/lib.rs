//! Two-level multiscale hybrid solvers for the Dirichlet diffusion problem
//! on polygonal meshes.
//!
//! The crate builds one discrete local space per coarse cell from fine-scale
//! P1 solves and assembles two global methods on top of it: the saddle-point
//! MHM formulation with skeletal flux unknowns, and the condensed MsHHO
//! formulation with face moment unknowns (plus its purely face-based
//! variant). Both reuse the same offline basis data, which is what makes
//! their solutions agree to solver precision.

pub mod analysis;
pub mod cache;
pub mod config;
pub mod field;
pub mod local;
pub mod mesh;
pub mod mhm;
pub mod mshho;
pub mod poly;
pub mod problem;
pub mod quad;
pub mod runner;
pub mod sparse;
