use crate::quadrature::GaussRule;

use super::{DarcyError, StructuredQuadMesh};

/// Quadrature points and weights covering the four cells of one patch.
#[derive(Debug, Clone)]
pub struct PatchQuadrature {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl PatchQuadrature {
    /// Tensor Gauss rule with `n` points per direction in each fine cell.
    pub fn new(mesh: &StructuredQuadMesh, patch: usize, n: usize) -> Self {
        let rule = GaussRule::new(n);
        let (hx, hy) = mesh.spacing();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for cell in mesh.patch_cells(patch) {
            let r = mesh.cell_rect(cell);
            for (eta, wy) in rule.iter() {
                for (xi, wx) in rule.iter() {
                    points.push((r.x0 + 0.5 * hx * (xi + 1.0), r.y0 + 0.5 * hy * (eta + 1.0)));
                    weights.push(0.25 * hx * hy * wx * wy);
                }
            }
        }
        Self { points, weights }
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.points.iter().map(|&(x, y)| f(x, y)).collect()
    }

    pub fn mean(&self, values: &[f64]) -> f64 {
        let area: f64 = self.weights.iter().sum();
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum::<f64>() / area
    }
}

/// `κ_M v = v - Π_M v`, with `Π_M` the weighted mean over the patch.
pub fn fluctuation(values: &[f64], weights: &[f64]) -> Result<Vec<f64>, DarcyError> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(DarcyError::EmptyPatch);
    }
    let area: f64 = weights.iter().sum();
    if !(area > 0.0) {
        return Err(DarcyError::EmptyPatch);
    }
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / area;
    Ok(values.iter().map(|v| v - mean).collect())
}
