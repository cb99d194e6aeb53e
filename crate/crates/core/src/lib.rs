//! Multi-scale porous-media flow and transport toolkit.
//!
//! Four computational areas, each in its own module:
//!
//! * [`pore`]: periodic sphere packs, voxelization, steady Stokes flow on a
//!   staggered grid, intrinsic velocity, permeability and velocity PDFs.
//! * [`darcy`]: equal-order bilinear finite elements for the Darcy
//!   saddle-point system with local projection stabilization (LPS).
//! * [`ident`]: identification of a piecewise-constant inverse-permeability
//!   field by adjoint-based Newton-CG inside a primal-dual active-set loop.
//! * [`pfem`]: hierarchic high-order FEM for 1D convection-diffusion, static
//!   condensation, numerical diffusivity and Péclet stability thresholds.
//!
//! [`cli`] wires these into batch experiments that emit data tables and a
//! hashed manifest.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod darcy;
pub mod ident;
pub mod linalg;
pub mod pfem;
pub mod pore;
pub mod quadrature;
