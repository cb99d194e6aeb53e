use serde::{Deserialize, Serialize};

use crate::quadrature::GaussRule;

use super::assembly::q1_values;
use super::{DarcyError, DarcySystem, StructuredQuadMesh};

/// Nodal velocity and pressure on the vertices of a [`StructuredQuadMesh`].
///
/// `velocity` stores all `u_x` values followed by all `u_y` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemState {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
}

impl FemState {
    pub fn zeros(num_vertices: usize) -> Self {
        Self { velocity: vec![0.0; 2 * num_vertices], pressure: vec![0.0; num_vertices] }
    }

    pub fn num_vertices(&self) -> usize {
        self.pressure.len()
    }

    pub fn ux(&self, v: usize) -> f64 {
        self.velocity[v]
    }

    pub fn uy(&self, v: usize) -> f64 {
        self.velocity[self.num_vertices() + v]
    }

    /// The full unknown vector `[u_x, u_y, p]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut x = self.velocity.clone();
        x.extend_from_slice(&self.pressure);
        x
    }

    pub fn from_vector(x: &[f64]) -> Self {
        let nv = x.len() / 3;
        Self { velocity: x[..2 * nv].to_vec(), pressure: x[2 * nv..].to_vec() }
    }

    /// Nodal interpolant of a closed-form solution.
    pub fn interpolate(mesh: &StructuredQuadMesh, f: impl Fn(f64, f64) -> ([f64; 2], f64)) -> Self {
        let nv = mesh.num_vertices();
        let mut s = Self::zeros(nv);
        for v in 0..nv {
            let (x, y) = mesh.vertex_coords(v);
            let (u, p) = f(x, y);
            s.velocity[v] = u[0];
            s.velocity[nv + v] = u[1];
            s.pressure[v] = p;
        }
        s
    }

    /// Finite element evaluation `(u_x, u_y, p)` at a point of the domain.
    pub fn eval(&self, mesh: &StructuredQuadMesh, x: f64, y: f64) -> [f64; 3] {
        let cell = mesh.locate(x, y);
        let r = mesh.cell_rect(cell);
        let (hx, hy) = mesh.spacing();
        let xi = 2.0 * (x - r.x0) / hx - 1.0;
        let eta = 2.0 * (y - r.y0) / hy - 1.0;
        let phi = q1_values(xi, eta);
        let nv = self.num_vertices();
        let mut out = [0.0; 3];
        for (a, v) in mesh.cell_vertices(cell).into_iter().enumerate() {
            out[0] += phi[a] * self.velocity[v];
            out[1] += phi[a] * self.velocity[nv + v];
            out[2] += phi[a] * self.pressure[v];
        }
        out
    }

    /// `∫ p` divided by the domain area, using vertex weights `∫ φ_i`.
    pub fn pressure_mean(&self, weights: &[f64]) -> f64 {
        let area: f64 = weights.iter().sum();
        self.pressure.iter().zip(weights).map(|(p, w)| p * w).sum::<f64>() / area
    }
}

/// Options for [`solve_state`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual `‖b - Ax‖ / ‖b‖` that a solve must reach.
    pub rel_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10 }
    }
}

/// Shifts the pressure block of `x` to zero mean.
pub(crate) fn shift_pressure(x: &mut [f64], weights: &[f64]) {
    let nv = weights.len();
    let area: f64 = weights.iter().sum();
    let mean = x[2 * nv..].iter().zip(weights).map(|(p, w)| p * w).sum::<f64>() / area;
    for p in &mut x[2 * nv..] {
        *p -= mean;
    }
}

/// Solves the assembled system and fixes the pressure gauge to zero mean.
pub fn solve_state(system: &DarcySystem, options: SolverOptions) -> Result<FemState, DarcyError> {
    let lu = system.factor()?.with_tolerance(options.rel_tol);
    let mut x = lu.solve(&system.rhs)?;
    shift_pressure(&mut x, &system.pressure_weights);
    Ok(FemState::from_vector(&x))
}

/// `(‖u - u_h‖, ‖p - p_h‖)` in L², integrated with a 3×3 Gauss rule per cell.
pub fn l2_errors(
    mesh: &StructuredQuadMesh,
    state: &FemState,
    oracle: impl Fn(f64, f64) -> ([f64; 2], f64),
) -> (f64, f64) {
    let rule = GaussRule::new(3);
    let (hx, hy) = mesh.spacing();
    let nv = state.num_vertices();
    let mut eu = 0.0;
    let mut ep = 0.0;
    for cell in 0..mesh.num_cells() {
        let r = mesh.cell_rect(cell);
        let vs = mesh.cell_vertices(cell);
        for (eta, wy) in rule.iter() {
            for (xi, wx) in rule.iter() {
                let phi = q1_values(xi, eta);
                let mut h = [0.0; 3];
                for a in 0..4 {
                    h[0] += phi[a] * state.velocity[vs[a]];
                    h[1] += phi[a] * state.velocity[nv + vs[a]];
                    h[2] += phi[a] * state.pressure[vs[a]];
                }
                let x = r.x0 + 0.5 * hx * (xi + 1.0);
                let y = r.y0 + 0.5 * hy * (eta + 1.0);
                let (u, p) = oracle(x, y);
                let w = 0.25 * hx * hy * wx * wy;
                eu += w * ((u[0] - h[0]).powi(2) + (u[1] - h[1]).powi(2));
                ep += w * (p - h[2]).powi(2);
            }
        }
    }
    (eu.sqrt(), ep.sqrt())
}
