use serde::{Deserialize, Serialize};

use super::{IdentError, InverseProblem, ParameterVector};

/// Controls for [`pdas_solve`] and [`newton_cg_step`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdasOptions {
    /// Stop when `‖q - P(q - ∇j)‖ ≤ tol` and the active set repeats.
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Sufficient-decrease constant of the Armijo rule.
    pub armijo: f64,
    pub max_halvings: usize,
    /// CG iteration cap; `None` means the number of parameters.
    pub max_cg: Option<usize>,
    /// Weight of the primal residual in the active-set prediction.
    pub complementarity: f64,
}

impl Default for PdasOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_outer: 50,
            max_inner: 50,
            armijo: 1e-4,
            max_halvings: 30,
            max_cg: None,
            complementarity: 1.0,
        }
    }
}

/// Result of one globalized Newton-CG step on the inactive coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub q: Vec<f64>,
    pub cost_before: f64,
    pub cost_after: f64,
    pub step_length: f64,
    pub cg_iterations: usize,
    pub negative_curvature: bool,
    /// `false` if the line search found no decrease; `q` is then unchanged.
    pub accepted: bool,
    /// The accepted step was clipped by a bound.
    pub hit_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub outer: usize,
    pub inner: usize,
    pub cost: f64,
    pub projected_gradient: f64,
    pub active: Vec<usize>,
    pub cg_iterations: usize,
    pub step_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdasDiagnostics {
    pub outer_iterations: usize,
    pub newton_steps: usize,
    pub final_cost: f64,
    pub final_projected_gradient: f64,
    pub active_set: Vec<usize>,
    pub history: Vec<IterationRecord>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One Newton-CG step restricted to the coordinates with `active[i] == false`.
///
/// The Newton system is solved inexactly by CG with forcing term
/// `min(0.5, √‖g‖)‖g‖`; on non-positive curvature CG stops and returns the
/// direction built so far (steepest descent if none). A projected Armijo
/// backtracking search then globalizes the step.
pub fn newton_cg_step(
    problem: &InverseProblem,
    q: &[f64],
    active: &[bool],
    options: &PdasOptions,
) -> Result<NewtonStep, IdentError> {
    let n = problem.num_params();
    if active.len() != n {
        return Err(IdentError::Shape(format!("active set has {} flags for {n} parameters", active.len())));
    }
    let eval = problem.evaluate(q)?;
    let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
    let g: Vec<f64> = free.iter().map(|&i| eval.gradient[i]).collect();
    let gnorm = norm(&g);
    let mut out = NewtonStep {
        q: q.to_vec(),
        cost_before: eval.cost,
        cost_after: eval.cost,
        step_length: 0.0,
        cg_iterations: 0,
        negative_curvature: false,
        accepted: true,
        hit_bound: false,
    };
    if free.is_empty() || gnorm == 0.0 {
        return Ok(out);
    }

    let scatter = |v: &[f64]| {
        let mut full = vec![0.0; n];
        for (k, &i) in free.iter().enumerate() {
            full[i] = v[k];
        }
        full
    };
    let forcing = 0.5f64.min(gnorm.sqrt()) * gnorm;
    let max_cg = options.max_cg.unwrap_or(n).max(1);
    let mut d = vec![0.0; free.len()];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..max_cg {
        let hp_full = eval.hessian_vector_product(&scatter(&p))?;
        let hp: Vec<f64> = free.iter().map(|&i| hp_full[i]).collect();
        let curv = dot(&p, &hp);
        out.cg_iterations = it + 1;
        if curv <= 0.0 {
            out.negative_curvature = true;
            if it == 0 {
                d = r.clone();
            }
            break;
        }
        let a = rr / curv;
        d.iter_mut().zip(&p).for_each(|(x, y)| *x += a * y);
        r.iter_mut().zip(&hp).for_each(|(x, y)| *x -= a * y);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= forcing {
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p.iter_mut().zip(&r).for_each(|(x, y)| *x = y + beta * *x);
    }
    if dot(&d, &g) >= 0.0 {
        d = g.iter().map(|v| -v).collect();
    }

    let full_d = scatter(&d);
    let mut t = 1.0;
    for _ in 0..=options.max_halvings {
        let raw: Vec<f64> = q.iter().zip(&full_d).map(|(a, b)| a + t * b).collect();
        let trial = problem.constraints.project(&raw);
        let step: Vec<f64> = trial.iter().zip(q).map(|(a, b)| a - b).collect();
        let decrease = options.armijo * dot(&eval.gradient, &step);
        let j = problem.reduced_cost(&trial)?;
        if j <= eval.cost + decrease && j <= eval.cost {
            out.hit_bound = trial != raw;
            out.q = trial;
            out.cost_after = j;
            out.step_length = t;
            return Ok(out);
        }
        t *= 0.5;
    }
    out.accepted = false;
    Ok(out)
}

/// Predicted active set: lower-active where `μ_i - c(q_i - l_i) > 0`,
/// upper-active where `-μ_i - c(u_i - q_i) > 0`, with the multiplier
/// estimate `μ_i = ∂j/∂q_i` on coordinates sitting on a bound and zero
/// elsewhere.
fn predict_active(problem: &InverseProblem, q: &[f64], g: &[f64], c: f64) -> Vec<bool> {
    let cs = &problem.constraints;
    (0..q.len())
        .map(|i| {
            let lo = cs.lower[i];
            let hi = cs.upper(i);
            let on_lower = q[i] <= lo;
            let on_upper = q[i] >= hi;
            let mu = if on_lower || on_upper { g[i] } else { 0.0 };
            (mu - c * (q[i] - lo) > 0.0) || (-mu - c * (hi - q[i]) > 0.0)
        })
        .collect()
}

/// Primal-dual active-set loop around [`newton_cg_step`].
///
/// The start vector is projected onto the admissible set first. Each outer
/// iteration predicts the active set from the current gradient and then
/// runs Newton-CG on the remaining coordinates.
pub fn pdas_solve(
    problem: &InverseProblem,
    q0: &ParameterVector,
    options: &PdasOptions,
) -> Result<(ParameterVector, PdasDiagnostics), IdentError> {
    if q0.len() != problem.num_params() {
        return Err(IdentError::Shape(format!(
            "start vector has {} entries for {} parameters",
            q0.len(),
            problem.num_params()
        )));
    }
    let cs = &problem.constraints;
    let mut q = cs.project(q0.as_slice());
    let mut history = Vec::new();
    let mut last_active: Option<Vec<bool>> = None;
    let mut newton_steps = 0;
    let mut pg_norm = f64::INFINITY;
    let mut stalled = false;
    let mut outer_done = 0;
    for outer in 1..=options.max_outer {
        outer_done = outer;
        let eval = problem.evaluate(&q)?;
        let active = predict_active(problem, &q, &eval.gradient, options.complementarity);
        pg_norm = norm(&cs.projected_gradient(&q, &eval.gradient));
        let active_idx: Vec<usize> = (0..q.len()).filter(|&i| active[i]).collect();
        history.push(IterationRecord {
            outer,
            inner: 0,
            cost: eval.cost,
            projected_gradient: pg_norm,
            active: active_idx.clone(),
            cg_iterations: 0,
            step_length: 0.0,
        });
        let repeated = last_active.as_ref().is_none_or(|a| *a == active);
        if pg_norm <= options.tol && repeated {
            return Ok((
                ParameterVector(q),
                PdasDiagnostics {
                    outer_iterations: outer,
                    newton_steps,
                    final_cost: eval.cost,
                    final_projected_gradient: pg_norm,
                    active_set: active_idx,
                    history,
                },
            ));
        }
        if stalled && repeated {
            break;
        }
        drop(eval);

        stalled = false;
        for inner in 1..=options.max_inner {
            let step = newton_cg_step(problem, &q, &active, options)?;
            if !step.accepted || step.q == q {
                stalled = true;
                break;
            }
            newton_steps += 1;
            q = step.q;
            let e = problem.evaluate(&q)?;
            let free_g: Vec<f64> = (0..q.len()).map(|i| if active[i] { 0.0 } else { e.gradient[i] }).collect();
            let pg_free = norm(&cs.projected_gradient(&q, &free_g));
            history.push(IterationRecord {
                outer,
                inner,
                cost: step.cost_after,
                projected_gradient: pg_free,
                active: active_idx.clone(),
                cg_iterations: step.cg_iterations,
                step_length: step.step_length,
            });
            // A clipped step means the active set needs a new prediction.
            if pg_free <= options.tol || step.hit_bound {
                break;
            }
        }
        last_active = Some(active);
    }
    Err(IdentError::OuterCapExceeded { iterations: outer_done, projected_gradient: pg_norm, last: q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darcy::{DarcyAssembler, LpsWeights, PermeabilityField, Rect, SourceField, StructuredQuadMesh};
    use crate::ident::{generate_synthetic_data, ConstraintSet, ObservationOperator};

    fn problem(source: SourceField, alpha: f64, q_ref: Option<&[f64]>) -> InverseProblem {
        let mesh = StructuredQuadMesh::new(8, 8, Rect::unit()).unwrap();
        let partition = PermeabilityField::grid_partition(Rect::unit(), 2, 1);
        let sub =
            PermeabilityField::new(partition.clone(), vec![[1.0, 1.0]; 2]).unwrap().cell_subdomains(&mesh).unwrap();
        let asm = DarcyAssembler::new(&mesh, sub, 2, &source, LpsWeights::default()).unwrap();
        let obs = ObservationOperator::identity(asm.dofs());
        let z = match q_ref {
            Some(q) => generate_synthetic_data(&asm, &obs, &q.to_vec().into(), 0.0, 0).unwrap(),
            None => vec![0.0; obs.output_dim()],
        };
        InverseProblem::new(asm, partition, obs, z, alpha, ConstraintSet::lower_only(4, 1.0)).unwrap()
    }

    #[test]
    fn all_active_is_a_no_op() {
        let p = problem(SourceField::manufactured(), 0.0, Some(&[2.0, 2.0, 2.0, 2.0]));
        let q = [1.0, 1.5, 2.0, 3.0];
        let s = newton_cg_step(&p, &q, &[true; 4], &PdasOptions::default()).unwrap();
        assert_eq!(s.q, q.to_vec());
        assert_eq!(s.cg_iterations, 0);
    }

    #[test]
    fn regularization_dominated_problem_needs_one_step() {
        // negligible data term: j ≈ |q|²/2, whose constrained minimizer is the lower bound
        let p = problem(SourceField::CosineProduct { amplitude: 1e-9 }, 1.0, None);
        let s = newton_cg_step(&p, &[5.0, 4.0, 3.0, 6.0], &[false; 4], &PdasOptions::default()).unwrap();
        assert_eq!(s.step_length, 1.0);
        assert_eq!(s.q, vec![1.0; 4]);
        let (q, diag) = pdas_solve(&p, &vec![5.0, 4.0, 3.0, 6.0].into(), &PdasOptions::default()).unwrap();
        assert_eq!(q.0, vec![1.0; 4]);
        assert_eq!(diag.newton_steps, 1);
        assert_eq!(diag.active_set, vec![0, 1, 2, 3]);
    }

    #[test]
    fn recovers_interior_reference() {
        let q_ref = [1.7, 2.4, 3.1, 1.3];
        let p = problem(SourceField::manufactured(), 0.0, Some(&q_ref));
        let (q, diag) = pdas_solve(&p, &ParameterVector::ones(4), &PdasOptions::default()).unwrap();
        for (a, b) in q.0.iter().zip(&q_ref) {
            assert!((a - b).abs() < 1e-6, "{q:?}");
        }
        assert!(diag.active_set.is_empty());
        // accepted inner steps never increase the cost
        let costs: Vec<f64> = diag.history.iter().map(|r| r.cost).collect();
        assert!(costs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn recovers_bound_touching_reference() {
        let q_ref = [1.0, 2.4, 1.0, 1.3];
        let p = problem(SourceField::manufactured(), 0.0, Some(&q_ref));
        let (q, _) = pdas_solve(&p, &vec![2.0; 4].into(), &PdasOptions::default()).unwrap();
        for (a, b) in q.0.iter().zip(&q_ref) {
            assert!((a - b).abs() < 1e-6, "{q:?}");
        }
        assert!(q.0.iter().all(|v| *v >= 1.0));
    }

    #[test]
    fn infeasible_start_is_projected() {
        let q_ref = [1.7, 2.4, 3.1, 1.3];
        let p = problem(SourceField::manufactured(), 0.0, Some(&q_ref));
        let (q, diag) = pdas_solve(&p, &vec![-3.0, 0.2, 2.0, 0.0].into(), &PdasOptions::default()).unwrap();
        assert!((q.0[2] - 3.1).abs() < 1e-6);
        assert!(diag.history[0].cost.is_finite());
    }

    #[test]
    fn outer_cap_reports_last_iterate() {
        let q_ref = [1.7, 2.4, 3.1, 1.3];
        let p = problem(SourceField::manufactured(), 0.0, Some(&q_ref));
        let opts = PdasOptions { max_outer: 1, max_inner: 1, ..Default::default() };
        match pdas_solve(&p, &ParameterVector::ones(4), &opts) {
            Err(IdentError::OuterCapExceeded { last, .. }) => assert_eq!(last.len(), 4),
            other => panic!("{other:?}"),
        }
    }
}
