use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::darcy::{DarcyAssembler, Factorization, FemState, Rect};

use super::{ConstraintSet, IdentError, ObservationOperator, ParameterVector};

/// Regularized least-squares identification problem
/// `min ‖C S(q) - z‖² + α/2 |q|²` subject to box constraints.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    pub assembler: DarcyAssembler,
    pub partition: Vec<Rect>,
    pub observation: ObservationOperator,
    pub data: Vec<f64>,
    pub alpha: f64,
    pub constraints: ConstraintSet,
    pub q_ref: Option<ParameterVector>,
}

/// Forward and adjoint quantities at one parameter vector. Hessian products
/// reuse the stored factorization.
#[derive(Debug)]
pub struct Evaluation<'a> {
    problem: &'a InverseProblem,
    q: Vec<f64>,
    lu: Factorization,
    x: Vec<f64>,
    lambda: Vec<f64>,
    pub cost: f64,
    pub gradient: Vec<f64>,
}

fn gauge(x: &mut [f64], w: &[f64]) {
    let nv = w.len();
    let area: f64 = w.iter().sum();
    let mean = x[2 * nv..].iter().zip(w).map(|(p, w)| p * w).sum::<f64>() / area;
    x[2 * nv..].iter_mut().for_each(|p| *p -= mean);
}

fn gauge_transpose(r: &mut [f64], w: &[f64]) {
    let nv = w.len();
    let area: f64 = w.iter().sum();
    let total: f64 = r[2 * nv..].iter().sum();
    r[2 * nv..].iter_mut().zip(w).for_each(|(v, w)| *v -= w * total / area);
}

fn forward(assembler: &DarcyAssembler, q: &[f64]) -> Result<(Factorization, Vec<f64>), IdentError> {
    let system = assembler.system(q)?;
    let lu = assembler.factor(&system)?;
    let x = lu.solve(&system.rhs)?;
    Ok((lu, x))
}

/// The gauge-fixed forward state `S(q)`.
pub(crate) fn solve_forward(assembler: &DarcyAssembler, q: &[f64]) -> Result<FemState, IdentError> {
    let (_, mut x) = forward(assembler, q)?;
    gauge(&mut x, assembler.pressure_weights());
    Ok(FemState::from_vector(&x))
}

/// `z = C S(q_ref) + noise`, with i.i.d. Gaussian noise of standard deviation
/// `noise` drawn from a generator seeded with `seed`.
pub fn generate_synthetic_data(
    assembler: &DarcyAssembler,
    observation: &ObservationOperator,
    q_ref: &ParameterVector,
    noise: f64,
    seed: u64,
) -> Result<Vec<f64>, IdentError> {
    if !(noise >= 0.0) {
        return Err(IdentError::InvalidInput(format!("noise level {noise} must be non-negative")));
    }
    let state = solve_forward(assembler, q_ref.as_slice())?;
    let mut z = observation.apply(&state.to_vector());
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, noise).map_err(|e| IdentError::InvalidInput(e.to_string()))?;
        z.iter_mut().for_each(|v| *v += dist.sample(&mut rng));
    }
    Ok(z)
}

impl InverseProblem {
    pub fn new(
        assembler: DarcyAssembler,
        partition: Vec<Rect>,
        observation: ObservationOperator,
        data: Vec<f64>,
        alpha: f64,
        constraints: ConstraintSet,
    ) -> Result<Self, IdentError> {
        let n = assembler.num_params();
        if partition.len() * 2 != n {
            return Err(IdentError::Shape(format!("{} subdomains for {} parameters", partition.len(), n)));
        }
        if constraints.len() != n {
            return Err(IdentError::Shape(format!("{} bounds for {} parameters", constraints.len(), n)));
        }
        if observation.input_dim() != assembler.dofs().len() {
            return Err(IdentError::Shape("observation operator does not match the mesh".into()));
        }
        if data.len() != observation.output_dim() {
            return Err(IdentError::Shape(format!(
                "data has {} entries, observation produces {}",
                data.len(),
                observation.output_dim()
            )));
        }
        if !(alpha >= 0.0) {
            return Err(IdentError::InvalidInput(format!("alpha = {alpha} must be non-negative")));
        }
        Ok(Self { assembler, partition, observation, data, alpha, constraints, q_ref: None })
    }

    pub fn with_reference(mut self, q_ref: ParameterVector) -> Self {
        self.q_ref = Some(q_ref);
        self
    }

    pub fn num_params(&self) -> usize {
        self.assembler.num_params()
    }

    fn weights(&self) -> &[f64] {
        self.assembler.pressure_weights()
    }

    fn misfit(&self, x: &[f64]) -> Vec<f64> {
        let mut t = x.to_vec();
        gauge(&mut t, self.weights());
        let mut r = self.observation.apply(&t);
        r.iter_mut().zip(&self.data).for_each(|(a, b)| *a -= b);
        r
    }

    /// `2 TᵀCᵀC T v`, the Hessian of the misfit with respect to the state.
    fn state_hessian(&self, v: &[f64]) -> Vec<f64> {
        let mut t = v.to_vec();
        gauge(&mut t, self.weights());
        let ct = self.observation.apply(&t);
        let mut out = self.observation.apply_transpose(&ct);
        gauge_transpose(&mut out, self.weights());
        out.iter_mut().for_each(|v| *v *= 2.0);
        out
    }

    fn regularization(&self, q: &[f64]) -> f64 {
        0.5 * self.alpha * q.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn reduced_cost(&self, q: &[f64]) -> Result<f64, IdentError> {
        self.constraints.check(q)?;
        let (_, x) = forward(&self.assembler, q)?;
        let r = self.misfit(&x);
        Ok(r.iter().map(|v| v * v).sum::<f64>() + self.regularization(q))
    }

    /// Cost, gradient and the adjoint state at `q`.
    pub fn evaluate(&self, q: &[f64]) -> Result<Evaluation<'_>, IdentError> {
        self.constraints.check(q)?;
        let (lu, x) = forward(&self.assembler, q)?;
        let r = self.misfit(&x);
        let cost = r.iter().map(|v| v * v).sum::<f64>() + self.regularization(q);
        let mut dj = self.observation.apply_transpose(&r);
        gauge_transpose(&mut dj, self.weights());
        dj.iter_mut().for_each(|v| *v *= 2.0);
        let lambda = lu.solve_transpose(&dj)?;
        let mut gradient = self.assembler.param_bilinear(&lambda, &x);
        for (g, qk) in gradient.iter_mut().zip(q) {
            *g = -*g + self.alpha * qk;
        }
        Ok(Evaluation { problem: self, q: q.to_vec(), lu, x, lambda, cost, gradient })
    }

    pub fn reduced_gradient(&self, q: &[f64]) -> Result<Vec<f64>, IdentError> {
        Ok(self.evaluate(q)?.gradient)
    }

    pub fn hessian_vector_product(&self, q: &[f64], dq: &[f64]) -> Result<Vec<f64>, IdentError> {
        self.evaluate(q)?.hessian_vector_product(dq)
    }

    /// `C S(q)`.
    pub fn observe(&self, q: &[f64]) -> Result<Vec<f64>, IdentError> {
        let state = solve_forward(&self.assembler, q)?;
        Ok(self.observation.apply(&state.to_vector()))
    }

    pub fn state(&self, q: &[f64]) -> Result<FemState, IdentError> {
        solve_forward(&self.assembler, q)
    }
}

impl Evaluation<'_> {
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Raw (ungauged) forward solution.
    pub fn state_vector(&self) -> &[f64] {
        &self.x
    }

    /// Second-order directional derivative `∇²j(q) dq` from one tangent and
    /// one dual-tangent solve.
    pub fn hessian_vector_product(&self, dq: &[f64]) -> Result<Vec<f64>, IdentError> {
        let p = self.problem;
        if dq.len() != p.num_params() {
            return Err(IdentError::Shape(format!("direction has {} entries", dq.len())));
        }
        if dq.iter().all(|v| *v == 0.0) {
            return Ok(vec![0.0; dq.len()]);
        }
        let asm = &p.assembler;
        let mut rhs = asm.param_action(dq, &self.x);
        rhs.iter_mut().for_each(|v| *v = -*v);
        let dx = self.lu.solve(&rhs)?;
        let mut rhs2 = p.state_hessian(&dx);
        let t = asm.param_action_transpose(dq, &self.lambda);
        rhs2.iter_mut().zip(t).for_each(|(a, b)| *a -= b);
        let dlambda = self.lu.solve_transpose(&rhs2)?;
        let a = asm.param_bilinear(&dlambda, &self.x);
        let b = asm.param_bilinear(&self.lambda, &dx);
        Ok((0..dq.len()).map(|k| -a[k] - b[k] + p.alpha * dq[k]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darcy::{LpsWeights, PermeabilityField, SourceField, StructuredQuadMesh};

    fn toy(alpha: f64, identity: bool) -> (InverseProblem, Vec<f64>) {
        let mesh = StructuredQuadMesh::new(8, 8, Rect::unit()).unwrap();
        let partition = PermeabilityField::grid_partition(Rect::unit(), 2, 1);
        let sub =
            PermeabilityField::new(partition.clone(), vec![[1.0, 1.0]; 2]).unwrap().cell_subdomains(&mesh).unwrap();
        let asm = DarcyAssembler::new(&mesh, sub, 2, &SourceField::manufactured(), LpsWeights::default()).unwrap();
        let obs = if identity {
            ObservationOperator::identity(asm.dofs())
        } else {
            ObservationOperator::point_set(&mesh, &ObservationOperator::lattice_points(&mesh, 4, 2)).unwrap()
        };
        let q_ref = vec![1.7, 2.4, 3.1, 1.3];
        let z = generate_synthetic_data(&asm, &obs, &q_ref.clone().into(), 0.0, 0).unwrap();
        let p = InverseProblem::new(asm, partition, obs, z, alpha, ConstraintSet::lower_only(4, 1.0)).unwrap();
        (p, q_ref)
    }

    #[test]
    fn cost_vanishes_at_reference() {
        let (p, q) = toy(0.0, true);
        assert!(p.reduced_cost(&q).unwrap() < 1e-20);
        let (p, q) = toy(0.3, true);
        let reg = 0.15 * q.iter().map(|v| v * v).sum::<f64>();
        assert!((p.reduced_cost(&q).unwrap() - reg).abs() < 1e-14);
    }

    #[test]
    fn perturbation_increases_cost() {
        let (p, q) = toy(0.0, true);
        let j0 = p.reduced_cost(&q).unwrap();
        for k in 0..4 {
            let mut r = q.clone();
            r[k] += 0.05;
            assert!(p.reduced_cost(&r).unwrap() > j0);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        for identity in [true, false] {
            let (p, _) = toy(0.1, identity);
            let q = vec![2.0, 1.5, 2.5, 3.0];
            let g = p.reduced_gradient(&q).unwrap();
            let h = 1e-5;
            for k in 0..4 {
                let mut a = q.clone();
                let mut b = q.clone();
                a[k] += h;
                b[k] -= h;
                let fd = (p.reduced_cost(&a).unwrap() - p.reduced_cost(&b).unwrap()) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1e-8), "k={k} fd={fd} g={}", g[k]);
            }
        }
    }

    #[test]
    fn regularization_adds_alpha_q() {
        let (p0, _) = toy(0.0, true);
        let (p1, _) = toy(0.7, true);
        let q = vec![2.0, 1.5, 2.5, 3.0];
        let g0 = p0.reduced_gradient(&q).unwrap();
        let g1 = p1.reduced_gradient(&q).unwrap();
        for k in 0..4 {
            assert!((g1[k] - g0[k] - 0.7 * q[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn hessian_is_symmetric_and_consistent() {
        let (p, _) = toy(0.05, false);
        let q = vec![2.0, 1.5, 2.5, 3.0];
        let e = p.evaluate(&q).unwrap();
        let d1 = [0.3, -0.2, 0.5, 0.1];
        let d2 = [-0.4, 0.6, 0.2, 0.3];
        let h1 = e.hessian_vector_product(&d1).unwrap();
        let h2 = e.hessian_vector_product(&d2).unwrap();
        let a: f64 = h1.iter().zip(&d2).map(|(x, y)| x * y).sum();
        let b: f64 = h2.iter().zip(&d1).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() <= 1e-8 * a.abs());
        let h = 1e-4;
        let qp: Vec<f64> = q.iter().zip(&d1).map(|(x, d)| x + h * d).collect();
        let qm: Vec<f64> = q.iter().zip(&d1).map(|(x, d)| x - h * d).collect();
        let gp = p.reduced_gradient(&qp).unwrap();
        let gm = p.reduced_gradient(&qm).unwrap();
        let scale = h1.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for k in 0..4 {
            let fd = (gp[k] - gm[k]) / (2.0 * h);
            assert!((fd - h1[k]).abs() <= 1e-5 * scale);
        }
        assert_eq!(e.hessian_vector_product(&[0.0; 4]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn noise_is_seeded() {
        let (p, q) = toy(0.0, false);
        let a = generate_synthetic_data(&p.assembler, &p.observation, &q.clone().into(), 1e-3, 7).unwrap();
        let b = generate_synthetic_data(&p.assembler, &p.observation, &q.clone().into(), 1e-3, 7).unwrap();
        let c = generate_synthetic_data(&p.assembler, &p.observation, &q.into(), 1e-3, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 24);
    }
}
