use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::darcy::{DarcyAssembler, LpsWeights, PermeabilityField, Rect, SourceField, StructuredQuadMesh};

use super::{
    generate_synthetic_data, pdas_solve, relative_parameter_errors, ConstraintSet, IdentError, InverseProblem,
    MeasurementPoint, ObservationOperator, ParameterVector, PdasDiagnostics, PdasOptions,
};

/// Seed of the shipped reference parameters.
pub const DEFAULT_SEED: u64 = 2012;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    Identity,
    Points,
}

/// Reference parameters drawn log-uniformly from `[1, 10]`.
pub fn default_q_ref(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| 10f64.powf(rng.random::<f64>())).collect()
}

/// Synthetic identification study: mesh, partition, observation layout,
/// regularization, bounds and the reference parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentConfig {
    #[serde(default = "default_cells")]
    pub nx: usize,
    #[serde(default = "default_cells")]
    pub ny: usize,
    #[serde(default = "Rect::unit")]
    pub domain: Rect,
    /// Subdomain grid `[gx, gy]`.
    #[serde(default = "default_partition")]
    pub partition: [usize; 2],
    pub observation: ObservationKind,
    /// Measurement points; defaults to an 8×4 lattice measuring `u_x, u_y, p`.
    #[serde(default)]
    pub points: Option<Vec<MeasurementPoint>>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_lower")]
    pub lower_bound: f64,
    #[serde(default)]
    pub upper_bound: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Standard deviation of additive Gaussian noise on the data.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub q_ref: Option<Vec<f64>>,
    #[serde(default)]
    pub q0: Option<Vec<f64>>,
    #[serde(default)]
    pub lps: LpsWeights,
    #[serde(default)]
    pub solver: PdasOptions,
}

fn default_cells() -> usize {
    64
}
fn default_partition() -> [usize; 2] {
    [4, 4]
}
fn default_lower() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl IdentConfig {
    pub fn new(observation: ObservationKind) -> Self {
        Self {
            nx: 64,
            ny: 64,
            domain: Rect::unit(),
            partition: [4, 4],
            observation,
            points: None,
            alpha: 0.0,
            lower_bound: 1.0,
            upper_bound: None,
            seed: DEFAULT_SEED,
            noise: 0.0,
            q_ref: None,
            q0: None,
            lps: LpsWeights::default(),
            solver: PdasOptions::default(),
        }
    }

    pub fn num_params(&self) -> usize {
        2 * self.partition[0] * self.partition[1]
    }

    pub fn reference(&self) -> Vec<f64> {
        self.q_ref.clone().unwrap_or_else(|| default_q_ref(self.num_params(), self.seed))
    }

    /// Builds the problem with synthetic data generated from the reference.
    pub fn build(&self) -> Result<(InverseProblem, ParameterVector), IdentError> {
        let mesh = StructuredQuadMesh::new(self.nx, self.ny, self.domain)?;
        let [gx, gy] = self.partition;
        if gx == 0 || gy == 0 {
            return Err(IdentError::InvalidInput("partition needs at least one subdomain".into()));
        }
        let n = self.num_params();
        let partition = PermeabilityField::grid_partition(self.domain, gx, gy);
        let sub = PermeabilityField::new(partition.clone(), vec![[1.0, 1.0]; gx * gy])?.cell_subdomains(&mesh)?;
        let source = SourceField::manufactured();
        let asm = DarcyAssembler::new(&mesh, sub, gx * gy, &source, self.lps)?;
        let obs = match self.observation {
            ObservationKind::Identity => ObservationOperator::identity(asm.dofs()),
            ObservationKind::Points => {
                let pts = match &self.points {
                    Some(p) => p.clone(),
                    None => ObservationOperator::lattice_points(&mesh, 8, 4),
                };
                ObservationOperator::point_set(&mesh, &pts)?
            }
        };
        let constraints = ConstraintSet::new(vec![self.lower_bound; n], self.upper_bound.map(|u| vec![u; n]))?;
        let q_ref = ParameterVector(self.reference());
        if q_ref.len() != n {
            return Err(IdentError::Shape(format!("q_ref has {} entries, expected {n}", q_ref.len())));
        }
        constraints.check(q_ref.as_slice())?;
        let z = generate_synthetic_data(&asm, &obs, &q_ref, self.noise, self.seed.wrapping_add(1))?;
        let problem =
            InverseProblem::new(asm, partition, obs, z, self.alpha, constraints)?.with_reference(q_ref.clone());
        Ok((problem, q_ref))
    }

    pub fn run(&self) -> Result<IdentReport, IdentError> {
        let (problem, q_ref) = self.build()?;
        let q0 = ParameterVector(self.q0.clone().unwrap_or_else(|| vec![1.0; self.num_params()]));
        let (q, diagnostics) = pdas_solve(&problem, &q0, &self.solver)?;
        let (ea, eb) = relative_parameter_errors(&q, &q_ref)?;
        Ok(IdentReport {
            q: q.0,
            q_ref: q_ref.0,
            relative_errors: [ea, eb],
            observation_dim: problem.observation.output_dim(),
            diagnostics,
        })
    }
}

/// Results file of an identification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentReport {
    pub q: Vec<f64>,
    pub q_ref: Vec<f64>,
    /// Relative errors of the first and second tensor components.
    pub relative_errors: [f64; 2],
    pub observation_dim: usize,
    pub diagnostics: PdasDiagnostics,
}
