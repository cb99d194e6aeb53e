//! High-order hierarchic FEM for the 1D stationary convection-diffusion
//! equation `a c' - Γ c'' = f` on (0, 1).
//!
//! Internal (bubble) modes are eliminated element by element, leaving a
//! nodal tridiagonal system whose symmetric part carries the extra numerical
//! diffusivity `Γ̄_p`. Stability of the nodal solution is governed by the
//! stencil asymmetry `α_p`, oscillation-free iff `α_p < 1`.

mod basis;
mod bvp;
mod condense;
mod diffusivity;
pub mod tables;

pub use basis::HierarchicBasis;
pub use bvp::{analytic_solution, oscillation_measure, solve_bvp, ConvDiff1DProblem, DiscreteSolution, Source1D};
pub use condense::{CondensedElement, CondensedTridiagonal};
pub use diffusivity::{
    alpha_p, bar_gamma_exact, bar_gamma_p, bar_gamma_p_numeric, max_stable_pe, min_degree_for_pe, truncation_error,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PfemError {
    #[error("closed-form diffusivity only exists for p = 2..5 (got p = {0}); use bar_gamma_p_numeric")]
    UnsupportedDegree(usize),
    #[error("polynomial degree must be at least {min} (got {got})")]
    DegreeTooLow { got: usize, min: usize },
    #[error("even degree p = {0} has alpha_p < 1 for every Pe, so there is no finite threshold")]
    EvenDegree(usize),
    #[error("internal-mode block is singular at Pe = {pe}")]
    SingularInternalBlock { pe: f64 },
    #[error("nodal system is singular")]
    SingularSystem,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("root search for alpha_p = 1 failed for p = {0}")]
    RootNotBracketed(usize),
}
