use serde::{Deserialize, Serialize};

use crate::darcy::{PermeabilityField, Rect};

use super::IdentError;

/// Flattened inverse-permeability entries: `q[2i]` and `q[2i + 1]` are the
/// two diagonal entries on subdomain `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// First diagonal entries of every subdomain.
    pub fn component_a(&self) -> Vec<f64> {
        self.0.iter().step_by(2).copied().collect()
    }

    /// Second diagonal entries of every subdomain.
    pub fn component_b(&self) -> Vec<f64> {
        self.0.iter().skip(1).step_by(2).copied().collect()
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Box constraints `lower ≤ q ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSet {
    pub lower: Vec<f64>,
    #[serde(default)]
    pub upper: Option<Vec<f64>>,
}

impl ConstraintSet {
    /// The default admissible set `q ≥ 1`.
    pub fn lower_only(n: usize, lower: f64) -> Self {
        Self { lower: vec![lower; n], upper: None }
    }

    pub fn new(lower: Vec<f64>, upper: Option<Vec<f64>>) -> Result<Self, IdentError> {
        if let Some(u) = &upper {
            if u.len() != lower.len() {
                return Err(IdentError::InvalidConstraints("bound vectors differ in length".into()));
            }
            if let Some(i) = (0..u.len()).find(|&i| u[i] < lower[i]) {
                return Err(IdentError::InvalidConstraints(format!("empty interval at entry {i}")));
            }
        }
        if lower.iter().any(|l| !(*l > 0.0)) {
            return Err(IdentError::InvalidConstraints(
                "lower bounds must be positive to keep the tensor definite".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn upper(&self, i: usize) -> f64 {
        self.upper.as_ref().map_or(f64::INFINITY, |u| u[i])
    }

    pub fn is_feasible(&self, i: usize, v: f64) -> bool {
        v >= self.lower[i] && v <= self.upper(i)
    }

    pub fn check(&self, q: &[f64]) -> Result<(), IdentError> {
        if q.len() != self.len() {
            return Err(IdentError::Shape(format!("{} parameters, {} bounds", q.len(), self.len())));
        }
        match (0..q.len()).find(|&i| !self.is_feasible(i, q[i])) {
            Some(i) => Err(IdentError::Infeasible { index: i, value: q[i] }),
            None => Ok(()),
        }
    }

    pub fn project(&self, q: &[f64]) -> Vec<f64> {
        q.iter().enumerate().map(|(i, &v)| v.max(self.lower[i]).min(self.upper(i))).collect()
    }

    /// `q - P(q - g)`, zero exactly at first-order optimal points.
    pub fn projected_gradient(&self, q: &[f64], g: &[f64]) -> Vec<f64> {
        let step: Vec<f64> = q.iter().zip(g).map(|(a, b)| a - b).collect();
        let p = self.project(&step);
        q.iter().zip(p).map(|(a, b)| a - b).collect()
    }
}

/// Builds the permeability field `diag(q[2i], q[2i+1])` on subdomain `i`.
pub fn perm_from_params(
    q: &ParameterVector,
    partition: &[Rect],
    constraints: Option<&ConstraintSet>,
) -> Result<PermeabilityField, IdentError> {
    if q.len() != 2 * partition.len() {
        return Err(IdentError::Shape(format!(
            "{} parameters for {} subdomains (expected {})",
            q.len(),
            partition.len(),
            2 * partition.len()
        )));
    }
    if let Some(c) = constraints {
        c.check(q.as_slice())?;
    }
    let entries = q.0.chunks(2).map(|c| [c[0], c[1]]).collect();
    Ok(PermeabilityField::new(partition.to_vec(), entries)?)
}

/// `(‖q^A - q^A_ref‖/‖q^A_ref‖, ‖q^B - q^B_ref‖/‖q^B_ref‖)`.
pub fn relative_parameter_errors(q: &ParameterVector, q_ref: &ParameterVector) -> Result<(f64, f64), IdentError> {
    if q.len() != q_ref.len() || !q.len().is_multiple_of(2) {
        return Err(IdentError::Shape(format!("lengths {} and {}", q.len(), q_ref.len())));
    }
    let rel = |a: Vec<f64>, r: Vec<f64>| {
        let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nr == 0.0 {
            return Err(IdentError::ZeroReference);
        }
        Ok(a.iter().zip(&r).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() / nr)
    };
    Ok((rel(q.component_a(), q_ref.component_a())?, rel(q.component_b(), q_ref.component_b())?))
}
