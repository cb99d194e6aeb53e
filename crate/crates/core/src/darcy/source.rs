use std::fmt;
use std::sync::Arc;

use crate::quadrature::GaussRule;

use super::{DarcyError, StructuredQuadMesh};

/// Source density `f_p(x, y)` on the right-hand side of `∇·u = f_p`.
#[derive(Clone)]
pub enum SourceField {
    Zero,
    /// `amplitude · cos(πx) cos(πy)`; amplitude 2 gives the manufactured problem.
    CosineProduct {
        amplitude: f64,
    },
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for SourceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::CosineProduct { amplitude } => write!(f, "CosineProduct({amplitude})"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl SourceField {
    pub fn manufactured() -> Self {
        Self::CosineProduct { amplitude: 2.0 }
    }

    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            Self::Zero => 0.0,
            Self::CosineProduct { amplitude } => amplitude * (PI * x).cos() * (PI * y).cos(),
            Self::Custom(f) => f(x, y),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// `(∫ f, ∫ |f|)` over the mesh domain with a 3×3 Gauss rule per cell.
    pub fn integrals(&self, mesh: &StructuredQuadMesh) -> (f64, f64) {
        if self.is_zero() {
            return (0.0, 0.0);
        }
        let rule = GaussRule::new(3);
        let (hx, hy) = mesh.spacing();
        let mut total = 0.0;
        let mut abs = 0.0;
        for c in 0..mesh.num_cells() {
            let r = mesh.cell_rect(c);
            for (xi, wx) in rule.iter() {
                for (eta, wy) in rule.iter() {
                    let x = r.x0 + 0.5 * hx * (xi + 1.0);
                    let y = r.y0 + 0.5 * hy * (eta + 1.0);
                    let w = 0.25 * hx * hy * wx * wy;
                    let v = self.eval(x, y);
                    total += w * v;
                    abs += w * v.abs();
                }
            }
        }
        (total, abs)
    }

    /// Rejects sources whose mean does not vanish, relative to `∫|f|`.
    pub fn check_compatible(&self, mesh: &StructuredQuadMesh, rel_tol: f64) -> Result<(), DarcyError> {
        let (total, abs) = self.integrals(mesh);
        if total.abs() > rel_tol * abs.max(f64::MIN_POSITIVE) && total.abs() > 1e-14 {
            return Err(DarcyError::IncompatibleSource { integral: total });
        }
        Ok(())
    }
}
