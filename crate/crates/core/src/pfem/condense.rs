use faer::linalg::solvers::Solve;
use faer::Mat;

use super::{HierarchicBasis, PfemError};
use crate::quadrature::GaussRule;

/// One element after eliminating its internal modes.
///
/// Rows/columns 0 and 1 are the left and right nodal values. The internal
/// coefficients are recovered as `recover_load - recover_matrix * c_nodal`.
#[derive(Debug, Clone)]
pub struct CondensedElement {
    pub matrix: [[f64; 2]; 2],
    pub load: [f64; 2],
    /// `K_ni K_ii^{-1} K_in`, the part subtracted from the nodal block.
    pub schur: [[f64; 2]; 2],
    pub recover_matrix: Vec<[f64; 2]>,
    pub recover_load: Vec<f64>,
}

impl CondensedElement {
    /// Element `[x_left, x_left + h]` of `velocity c' - diffusivity c'' = source`.
    pub fn new(
        basis: &HierarchicBasis,
        h: f64,
        x_left: f64,
        velocity: f64,
        diffusivity: f64,
        source: &dyn Fn(f64) -> f64,
    ) -> Result<Self, PfemError> {
        let n = basis.num_modes();
        let rule = GaussRule::new(basis.degree() + 1);
        let mut k = vec![vec![0.0; n]; n];
        let mut f = vec![0.0; n];
        let jac = 0.5 * h;
        for (xi, w) in rule.iter() {
            let v = basis.values(xi);
            let d = basis.derivatives(xi);
            let fx = source(x_left + jac * (xi + 1.0));
            for i in 0..n {
                f[i] += w * jac * fx * v[i];
                for j in 0..n {
                    k[i][j] += w * (diffusivity * d[i] * d[j] / jac + velocity * v[i] * d[j]);
                }
            }
        }
        let mut matrix = [[k[0][0], k[0][1]], [k[1][0], k[1][1]]];
        let mut load = [f[0], f[1]];
        let m = basis.num_internal();
        if m == 0 {
            return Ok(Self {
                matrix,
                load,
                schur: [[0.0; 2]; 2],
                recover_matrix: Vec::new(),
                recover_load: Vec::new(),
            });
        }
        let kii = Mat::<f64>::from_fn(m, m, |i, j| k[i + 2][j + 2]);
        let lu = kii.partial_piv_lu();
        let u = lu.U();
        let (mut umin, mut umax) = (f64::INFINITY, 0.0f64);
        for i in 0..m {
            let a = u[(i, i)].abs();
            umin = umin.min(a);
            umax = umax.max(a);
        }
        let pe = velocity * h / (2.0 * diffusivity);
        if !(umin > 1e-14 * umax) {
            return Err(PfemError::SingularInternalBlock { pe });
        }
        // columns: K_in[:,0], K_in[:,1], F_i
        let rhs = Mat::<f64>::from_fn(m, 3, |i, c| if c < 2 { k[i + 2][c] } else { f[i + 2] });
        let sol = lu.solve(&rhs);
        let mut schur = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                schur[a][b] = (0..m).map(|i| k[a][i + 2] * sol[(i, b)]).sum();
            }
            load[a] -= (0..m).map(|i| k[a][i + 2] * sol[(i, 2)]).sum::<f64>();
        }
        for a in 0..2 {
            for b in 0..2 {
                matrix[a][b] -= schur[a][b];
            }
        }
        let recover_matrix = (0..m).map(|i| [sol[(i, 0)], sol[(i, 1)]]).collect();
        let recover_load = (0..m).map(|i| sol[(i, 2)]).collect();
        Ok(Self { matrix, load, schur, recover_matrix, recover_load })
    }
}

/// Interior-node row of the assembled condensed system, written as
/// `(Γ + Γ̄_p)/h² · tridiag(-1 - α_p, 2, -1 + α_p)` after division by `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensedTridiagonal {
    pub h: f64,
    pub velocity: f64,
    pub gamma_eff: f64,
    pub bar_gamma: f64,
    pub alpha: f64,
    /// Raw stencil coefficients on `c_{j-1}, c_j, c_{j+1}`.
    pub lower: f64,
    pub diag: f64,
    pub upper: f64,
    /// Interior-node right-hand side after condensation.
    pub rhs: f64,
}

impl CondensedTridiagonal {
    pub fn from_element(elem: &CondensedElement, h: f64, velocity: f64, gamma_eff: f64) -> Self {
        let lower = elem.matrix[1][0];
        let diag = elem.matrix[1][1] + elem.matrix[0][0];
        let upper = elem.matrix[0][1];
        // Γ̄ taken from the Schur trace alone; reading it off `diag` would
        // cancel against Γ for small Pe.
        let bar_gamma = -0.5 * h * (elem.schur[0][0] + elem.schur[1][1]);
        let alpha = (upper - lower) / diag;
        Self { h, velocity, gamma_eff, bar_gamma, alpha, lower, diag, upper, rhs: elem.load[0] + elem.load[1] }
    }

    /// The normalized stencil `(-1 - α, 2, -1 + α)`.
    pub fn normalized(&self) -> [f64; 3] {
        let s = 2.0 / self.diag;
        [self.lower * s, 2.0, self.upper * s]
    }

    /// Scalar prefactor `(Γ + Γ̄_p)/h²`.
    pub fn scale(&self) -> f64 {
        (self.gamma_eff + self.bar_gamma) / (self.h * self.h)
    }
}
