//! Identification of piecewise-constant diagonal inverse permeabilities from
//! observations of the Darcy state.
//!
//! The reduced cost is `j(q) = ‖C S(q) - z‖² + α/2 |q|²` with `S` the
//! discrete forward solve. Gradients come from one adjoint solve, Hessian
//! products from a tangent and a dual-tangent solve. Box constraints are
//! handled by a primal-dual active-set loop around a globalized Newton-CG
//! method on the inactive coordinates.

mod config;
mod observe;
mod optimize;
mod params;
mod problem;

pub use config::{default_q_ref, IdentConfig, IdentReport, ObservationKind, DEFAULT_SEED};
pub use observe::{MeasurementPoint, ObservationOperator, Quantity};
pub use optimize::{newton_cg_step, pdas_solve, IterationRecord, NewtonStep, PdasDiagnostics, PdasOptions};
pub use params::{perm_from_params, relative_parameter_errors, ConstraintSet, ParameterVector};
pub use problem::{generate_synthetic_data, Evaluation, InverseProblem};

use thiserror::Error;

use crate::darcy::DarcyError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdentError {
    #[error(transparent)]
    Darcy(#[from] DarcyError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("parameter {index} = {value} violates its bounds")]
    Infeasible { index: usize, value: f64 },
    #[error("invalid constraint set: {0}")]
    InvalidConstraints(String),
    #[error("measurement point ({x}, {y}) lies outside the domain")]
    PointOutsideDomain { x: f64, y: f64 },
    #[error("reference component has zero norm")]
    ZeroReference,
    #[error("no convergence after {iterations} outer iterations (projected gradient {projected_gradient:e})")]
    OuterCapExceeded { iterations: usize, projected_gradient: f64, last: Vec<f64> },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
