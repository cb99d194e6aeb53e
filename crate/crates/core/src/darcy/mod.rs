//! Forward solver for the Darcy saddle-point system
//! `K⁻¹ u + ∇p = 0`, `∇·u = f` on a rectangle with `u·n = 0` on the boundary.
//!
//! Velocity and pressure use the same bilinear space. Stability comes from
//! local projection stabilization on 2×2 patches of the fine mesh:
//!
//! ```text
//! Σ_M ∫_M τ_u h_M² κ_M(∇u):κ_M(∇v) + τ_p κ_M(∇p)·κ_M(∇q),   κ_M = Id - Π_M
//! ```
//!
//! where `Π_M` is the L² projection onto constants on patch `M`.

mod assembly;
mod export;
mod fluctuation;
mod manufactured;
mod mesh;
mod perm;
mod source;
mod state;

pub use assembly::{assemble_darcy, DarcyAssembler, DarcySystem, DofMap, Factorization, LpsWeights};
pub use export::{state_csv, DarcyHeader};
pub use fluctuation::{fluctuation, PatchQuadrature};
pub use manufactured::manufactured_solution;
pub use mesh::{Rect, StructuredQuadMesh};
pub use perm::PermeabilityField;
pub use source::SourceField;
pub use state::{l2_errors, solve_state, FemState, SolverOptions};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DarcyError {
    #[error("cell counts must be even and >= 2 for a patch structure (got {nx} x {ny})")]
    PatchStructure { nx: usize, ny: usize },
    #[error("domain has zero or negative area")]
    DegenerateDomain,
    #[error("inverse-permeability entry {value} in subdomain {subdomain} is not positive")]
    NonPositivePermeability { subdomain: usize, value: f64 },
    #[error("partition does not match the mesh: {0}")]
    PartitionMismatch(String),
    #[error("source integrates to {integral:e} over the domain; a zero-mean source is required")]
    IncompatibleSource { integral: f64 },
    #[error("patch has no quadrature values")]
    EmptyPatch,
    #[error("linear solve did not reach tolerance (relative residual {residual:e})")]
    NotConverged { residual: f64 },
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("{0}")]
    InvalidInput(String),
}
