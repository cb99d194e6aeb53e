use std::fmt;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::{CondensedElement, HierarchicBasis, PfemError};

/// Right-hand side of the 1D problem.
#[derive(Clone)]
pub enum Source1D {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Source1D {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Source1D::Constant(c) => *c,
            Source1D::Function(f) => f(x),
        }
    }
}

impl fmt::Debug for Source1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source1D::Constant(c) => write!(f, "Constant({c})"),
            Source1D::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// `velocity c' - diffusivity c'' = source` on (0, 1) with Dirichlet ends
/// and `elements` uniform elements.
#[derive(Debug, Clone)]
pub struct ConvDiff1DProblem {
    pub velocity: f64,
    pub diffusivity: f64,
    pub source: Source1D,
    pub left: f64,
    pub right: f64,
    pub elements: usize,
}

impl ConvDiff1DProblem {
    /// The boundary-layer problem with `c(0) = 0`, `c(1) = 1` and no source.
    pub fn boundary_layer(velocity: f64, diffusivity: f64, elements: usize) -> Self {
        Self { velocity, diffusivity, source: Source1D::Constant(0.0), left: 0.0, right: 1.0, elements }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.elements as f64
    }

    /// Mesh Péclet number `u h / (2 Γ)`.
    pub fn mesh_peclet(&self) -> f64 {
        self.velocity * self.h() / (2.0 * self.diffusivity)
    }

    fn validate(&self) -> Result<(), PfemError> {
        if !(self.diffusivity > 0.0) {
            return Err(PfemError::InvalidProblem(format!("diffusivity must be positive, got {}", self.diffusivity)));
        }
        if self.elements == 0 {
            return Err(PfemError::InvalidProblem("need at least one element".into()));
        }
        if !self.velocity.is_finite() || !self.left.is_finite() || !self.right.is_finite() {
            return Err(PfemError::InvalidProblem("non-finite problem data".into()));
        }
        Ok(())
    }
}

/// Galerkin solution: nodal values plus per-element internal coefficients.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    basis: HierarchicBasis,
    h: f64,
    pub nodal: Vec<f64>,
    pub internal: Vec<Vec<f64>>,
}

impl DiscreteSolution {
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn node_coordinates(&self) -> Vec<f64> {
        (0..self.nodal.len()).map(|j| j as f64 * self.h).collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.internal.len();
        let e = ((x / self.h).floor() as isize).clamp(0, n as isize - 1) as usize;
        let xi = 2.0 * (x - e as f64 * self.h) / self.h - 1.0;
        let v = self.basis.values(xi);
        let mut c = self.nodal[e] * v[0] + self.nodal[e + 1] * v[1];
        for (k, a) in self.internal[e].iter().enumerate() {
            c += a * v[k + 2];
        }
        c
    }
}

pub fn solve_bvp(problem: &ConvDiff1DProblem, p: usize) -> Result<DiscreteSolution, PfemError> {
    if p < 1 {
        return Err(PfemError::DegreeTooLow { got: p, min: 1 });
    }
    problem.validate()?;
    let n = problem.elements;
    let h = problem.h();
    let basis = HierarchicBasis::new(p);
    let src = |x: f64| problem.source.eval(x);
    let elems = (0..n)
        .map(|e| CondensedElement::new(&basis, h, e as f64 * h, problem.velocity, problem.diffusivity, &src))
        .collect::<Result<Vec<_>, _>>()?;

    let mut nodal = vec![0.0; n + 1];
    nodal[0] = problem.left;
    nodal[n] = problem.right;
    let m = n - 1;
    if m > 0 {
        let mut trip = Vec::with_capacity(3 * m);
        let mut rhs = Mat::<f64>::zeros(m, 1);
        for j in 1..n {
            let (l, r) = (&elems[j - 1], &elems[j]);
            let row = j - 1;
            trip.push(Triplet::new(row, row, l.matrix[1][1] + r.matrix[0][0]));
            rhs[(row, 0)] += l.load[1] + r.load[0];
            if j > 1 {
                trip.push(Triplet::new(row, row - 1, l.matrix[1][0]));
            } else {
                rhs[(row, 0)] -= l.matrix[1][0] * problem.left;
            }
            if j < n - 1 {
                trip.push(Triplet::new(row, row + 1, r.matrix[0][1]));
            } else {
                rhs[(row, 0)] -= r.matrix[0][1] * problem.right;
            }
        }
        let a =
            SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &trip).map_err(|_| PfemError::SingularSystem)?;
        let lu = a.sp_lu().map_err(|_| PfemError::SingularSystem)?;
        lu.solve_in_place(rhs.as_mut());
        for j in 1..n {
            let v = rhs[(j - 1, 0)];
            if !v.is_finite() {
                return Err(PfemError::SingularSystem);
            }
            nodal[j] = v;
        }
    }

    let internal = elems
        .iter()
        .enumerate()
        .map(|(e, el)| {
            el.recover_load
                .iter()
                .zip(&el.recover_matrix)
                .map(|(g, hrow)| g - hrow[0] * nodal[e] - hrow[1] * nodal[e + 1])
                .collect()
        })
        .collect();
    Ok(DiscreteSolution { basis, h, nodal, internal })
}

/// Exact solution of `a c' - Γ c'' = 0`, `c(0) = 0`, `c(1) = 1`, written so
/// that no exponential overflows for large `a/Γ`.
pub fn analytic_solution(a: f64, gamma_eff: f64, x: f64) -> f64 {
    let r = a / gamma_eff;
    if r == 0.0 {
        return x;
    }
    if r > 0.0 {
        (r * (x - 1.0)).exp() * (-r * x).exp_m1() / (-r).exp_m1()
    } else {
        (r * x).exp_m1() / r.exp_m1()
    }
}

/// `Σ_j sqrt(max(0, -Δc_j Δc_{j+1}))` over consecutive nodal increments;
/// zero iff the sequence is monotone.
pub fn oscillation_measure(nodal: &[f64]) -> f64 {
    let inc: Vec<f64> = nodal.windows(2).map(|w| w[1] - w[0]).collect();
    inc.windows(2).map(|d| (-d[0] * d[1]).max(0.0).sqrt()).sum()
}
