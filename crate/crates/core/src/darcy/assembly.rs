use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{Pair, SparseColMat, SymbolicSparseColMat};
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::quadrature::GaussRule;

use super::{DarcyError, PermeabilityField, SourceField, StructuredQuadMesh};

const NO_PARAM: u32 = u32::MAX;

/// Scaling constants of the two stabilization terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpsWeights {
    /// Multiplies `h_M² κ(∇u):κ(∇v)`.
    pub velocity: f64,
    /// Multiplies `κ(∇p)·κ(∇q)`.
    pub pressure: f64,
}

impl Default for LpsWeights {
    fn default() -> Self {
        Self { velocity: 1.0, pressure: 1.0 }
    }
}

/// Unknown layout: all `u_x` values, then all `u_y`, then all `p`, each
/// indexed by mesh vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    pub num_vertices: usize,
}

impl DofMap {
    pub fn ux(&self, v: usize) -> usize {
        v
    }
    pub fn uy(&self, v: usize) -> usize {
        self.num_vertices + v
    }
    pub fn p(&self, v: usize) -> usize {
        2 * self.num_vertices + v
    }
    pub fn len(&self) -> usize {
        3 * self.num_vertices
    }
    pub fn is_empty(&self) -> bool {
        self.num_vertices == 0
    }
}

/// Bilinear shape functions on the reference square, counter-clockwise from
/// `(-1, -1)`.
fn q1(xi: f64, eta: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    const SX: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
    const SY: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];
    let mut v = [0.0; 4];
    let mut dxi = [0.0; 4];
    let mut deta = [0.0; 4];
    for a in 0..4 {
        v[a] = 0.25 * (1.0 + SX[a] * xi) * (1.0 + SY[a] * eta);
        dxi[a] = 0.25 * SX[a] * (1.0 + SY[a] * eta);
        deta[a] = 0.25 * SY[a] * (1.0 + SX[a] * xi);
    }
    (v, dxi, deta)
}

/// Bilinear interpolation helpers shared with the state and error code.
pub(crate) fn q1_values(xi: f64, eta: f64) -> [f64; 4] {
    q1(xi, eta).0
}

/// Assembled linear system for one permeability field.
#[derive(Debug, Clone)]
pub struct DarcySystem {
    pub matrix: SparseColMat<usize, f64>,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    /// `∫ φ_i` for every vertex; used for the zero-mean pressure gauge.
    pub pressure_weights: Vec<f64>,
    /// Rows replaced by identity rows (boundary normal velocity, pressure pin).
    pub constrained: Vec<bool>,
    pub(crate) rows: Vec<usize>,
    pub(crate) cols: Vec<usize>,
    pub(crate) vals: Vec<f64>,
}

impl DarcySystem {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            y[r] += v * x[c];
        }
        y
    }

    pub fn factor(&self) -> Result<Factorization, DarcyError> {
        Factorization::new(self, None)
    }
}

/// Assembles the stabilized Darcy system for a fixed mesh, partition and
/// source, with the inverse-permeability entries left as parameters.
///
/// The matrix is affine in the flattened entries `q = (a_0, b_0, a_1, ...)`:
/// `A(q) = A_0 + Σ_k q_k M_k`, where `M_k` is the velocity mass matrix of one
/// component restricted to one subdomain (zero on constrained rows).
#[derive(Debug, Clone)]
pub struct DarcyAssembler {
    mesh: StructuredQuadMesh,
    cell_subdomain: Vec<usize>,
    num_params: usize,
    dofs: DofMap,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    tags: Vec<u32>,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: faer::sparse::Argsort<usize>,
    symbolic_lu: SymbolicLu<usize>,
    rhs: Vec<f64>,
    pressure_weights: Vec<f64>,
    constrained: Vec<bool>,
}

impl DarcyAssembler {
    pub fn new(
        mesh: &StructuredQuadMesh,
        cell_subdomain: Vec<usize>,
        num_subdomains: usize,
        source: &SourceField,
        lps: LpsWeights,
    ) -> Result<Self, DarcyError> {
        if cell_subdomain.len() != mesh.num_cells() {
            return Err(DarcyError::PartitionMismatch(format!(
                "{} cell labels for {} cells",
                cell_subdomain.len(),
                mesh.num_cells()
            )));
        }
        if let Some(&bad) = cell_subdomain.iter().find(|&&s| s >= num_subdomains) {
            return Err(DarcyError::PartitionMismatch(format!("subdomain label {bad} out of range")));
        }
        if !(lps.velocity >= 0.0 && lps.pressure >= 0.0) {
            return Err(DarcyError::InvalidInput("stabilization weights must be non-negative".into()));
        }
        source.check_compatible(mesh, 1e-8)?;

        let nv = mesh.num_vertices();
        let dofs = DofMap { num_vertices: nv };
        let n = dofs.len();
        let (hx, hy) = mesh.spacing();
        let rule = GaussRule::new(2);
        let jac = 0.25 * hx * hy;

        let mut constrained = vec![false; n];
        for j in 0..=mesh.ny() {
            for i in 0..=mesh.nx() {
                let v = mesh.vertex_index(i, j);
                if i == 0 || i == mesh.nx() {
                    constrained[dofs.ux(v)] = true;
                }
                if j == 0 || j == mesh.ny() {
                    constrained[dofs.uy(v)] = true;
                }
            }
        }
        constrained[dofs.p(0)] = true;

        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut tags = Vec::new();
        let mut push = |r: usize, c: usize, v: f64, tag: u32| {
            if !constrained[r] && v != 0.0 {
                rows.push(r);
                cols.push(c);
                vals.push(v);
                tags.push(tag);
            }
        };

        let mut rhs = vec![0.0; n];
        let mut pressure_weights = vec![0.0; nv];

        // Galerkin terms, cell by cell. Every cell has the same reference
        // geometry, so local matrices are computed once.
        let mut mass = [[0.0; 4]; 4];
        let mut div_x = [[0.0; 4]; 4]; // ∫ φ_a ∂x φ_b
        let mut div_y = [[0.0; 4]; 4];
        let mut lumped = [0.0; 4];
        for (eta, wy) in rule.iter() {
            for (xi, wx) in rule.iter() {
                let (v, dxi, deta) = q1(xi, eta);
                let w = wx * wy * jac;
                for a in 0..4 {
                    lumped[a] += w * v[a];
                    for b in 0..4 {
                        mass[a][b] += w * v[a] * v[b];
                        div_x[a][b] += w * v[a] * dxi[b] * 2.0 / hx;
                        div_y[a][b] += w * v[a] * deta[b] * 2.0 / hy;
                    }
                }
            }
        }
        for cell in 0..mesh.num_cells() {
            let vs = mesh.cell_vertices(cell);
            let s = cell_subdomain[cell] as u32;
            for a in 0..4 {
                pressure_weights[vs[a]] += lumped[a];
                for b in 0..4 {
                    push(dofs.ux(vs[a]), dofs.ux(vs[b]), mass[a][b], 2 * s);
                    push(dofs.uy(vs[a]), dofs.uy(vs[b]), mass[a][b], 2 * s + 1);
                    // -∫ p ∇·φ_v in the momentum rows
                    push(dofs.ux(vs[a]), dofs.p(vs[b]), -div_x[b][a], NO_PARAM);
                    push(dofs.uy(vs[a]), dofs.p(vs[b]), -div_y[b][a], NO_PARAM);
                    // ∫ φ_p ∇·u in the continuity rows
                    push(dofs.p(vs[a]), dofs.ux(vs[b]), div_x[a][b], NO_PARAM);
                    push(dofs.p(vs[a]), dofs.uy(vs[b]), div_y[a][b], NO_PARAM);
                }
            }
            if !source.is_zero() {
                let r = mesh.cell_rect(cell);
                for (eta, wy) in rule.iter() {
                    for (xi, wx) in rule.iter() {
                        let (v, _, _) = q1(xi, eta);
                        let x = r.x0 + 0.5 * hx * (xi + 1.0);
                        let y = r.y0 + 0.5 * hy * (eta + 1.0);
                        let f = source.eval(x, y) * wx * wy * jac;
                        for a in 0..4 {
                            rhs[dofs.p(vs[a])] += f * v[a];
                        }
                    }
                }
            }
        }

        // Stabilization, patch by patch.
        for patch in 0..mesh.num_patches() {
            let (verts, s) = patch_stiffness_fluctuation(mesh, patch, &rule);
            let hm2 = mesh.patch_diameter(patch).powi(2);
            for a in 0..9 {
                for b in 0..9 {
                    let v = s[a][b];
                    push(dofs.ux(verts[a]), dofs.ux(verts[b]), lps.velocity * hm2 * v, NO_PARAM);
                    push(dofs.uy(verts[a]), dofs.uy(verts[b]), lps.velocity * hm2 * v, NO_PARAM);
                    push(dofs.p(verts[a]), dofs.p(verts[b]), lps.pressure * v, NO_PARAM);
                }
            }
        }

        for (r, &c) in constrained.iter().enumerate() {
            if c {
                rows.push(r);
                cols.push(r);
                vals.push(1.0);
                tags.push(NO_PARAM);
            }
        }

        // Make the discrete source exactly mean-free so the pinned pressure
        // row loses no information.
        let total_w: f64 = pressure_weights.iter().sum();
        let total_f: f64 = (0..nv).map(|v| rhs[dofs.p(v)]).sum();
        for v in 0..nv {
            rhs[dofs.p(v)] -= pressure_weights[v] * total_f / total_w;
        }
        for (r, &c) in constrained.iter().enumerate() {
            if c {
                rhs[r] = 0.0;
            }
        }

        let pairs: Vec<Pair<usize, usize>> = rows.iter().zip(&cols).map(|(&row, &col)| Pair { row, col }).collect();
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(n, n, &pairs)
            .map_err(|e| DarcyError::Factorization(format!("{e:?}")))?;
        let symbolic_lu =
            SymbolicLu::try_new(symbolic.as_ref()).map_err(|e| DarcyError::Factorization(format!("{e:?}")))?;

        Ok(Self {
            mesh: mesh.clone(),
            cell_subdomain,
            num_params: 2 * num_subdomains,
            dofs,
            rows,
            cols,
            vals,
            tags,
            symbolic,
            argsort,
            symbolic_lu,
            rhs,
            pressure_weights,
            constrained,
        })
    }

    pub fn from_field(
        mesh: &StructuredQuadMesh,
        perm: &PermeabilityField,
        source: &SourceField,
        lps: LpsWeights,
    ) -> Result<Self, DarcyError> {
        let sub = perm.cell_subdomains(mesh)?;
        Self::new(mesh, sub, perm.num_subdomains(), source, lps)
    }

    pub fn mesh(&self) -> &StructuredQuadMesh {
        &self.mesh
    }

    pub fn dofs(&self) -> DofMap {
        self.dofs
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn cell_subdomain(&self) -> &[usize] {
        &self.cell_subdomain
    }

    pub fn pressure_weights(&self) -> &[f64] {
        &self.pressure_weights
    }

    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    fn check_params(&self, q: &[f64]) -> Result<(), DarcyError> {
        if q.len() != self.num_params {
            return Err(DarcyError::PartitionMismatch(format!(
                "{} parameters for {} subdomains",
                q.len(),
                self.num_params / 2
            )));
        }
        if let Some(k) = q.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(DarcyError::NonPositivePermeability { subdomain: k / 2, value: q[k] });
        }
        Ok(())
    }

    fn values(&self, q: &[f64]) -> Vec<f64> {
        self.vals.iter().zip(&self.tags).map(|(&v, &t)| if t == NO_PARAM { v } else { v * q[t as usize] }).collect()
    }

    /// System for the flattened inverse-permeability entries `q`.
    pub fn system(&self, q: &[f64]) -> Result<DarcySystem, DarcyError> {
        self.check_params(q)?;
        let vals = self.values(q);
        let matrix = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, &vals)
            .map_err(|e| DarcyError::Factorization(format!("{e:?}")))?;
        Ok(DarcySystem {
            matrix,
            rhs: self.rhs.clone(),
            dofs: self.dofs,
            pressure_weights: self.pressure_weights.clone(),
            constrained: self.constrained.clone(),
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            vals,
        })
    }

    /// Factorization reusing the symbolic analysis of the fixed pattern.
    pub fn factor(&self, system: &DarcySystem) -> Result<Factorization, DarcyError> {
        Factorization::new(system, Some(&self.symbolic_lu))
    }

    /// `Σ_k dq_k M_k x`.
    pub fn param_action(&self, dq: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for i in 0..self.vals.len() {
            let t = self.tags[i];
            if t != NO_PARAM {
                y[self.rows[i]] += dq[t as usize] * self.vals[i] * x[self.cols[i]];
            }
        }
        y
    }

    /// `(Σ_k dq_k M_k)ᵀ y`.
    pub fn param_action_transpose(&self, dq: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        for i in 0..self.vals.len() {
            let t = self.tags[i];
            if t != NO_PARAM {
                out[self.cols[i]] += dq[t as usize] * self.vals[i] * y[self.rows[i]];
            }
        }
        out
    }

    /// The vector `(yᵀ M_k x)_k`.
    pub fn param_bilinear(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.num_params];
        for i in 0..self.vals.len() {
            let t = self.tags[i];
            if t != NO_PARAM {
                g[t as usize] += y[self.rows[i]] * self.vals[i] * x[self.cols[i]];
            }
        }
        g
    }
}

/// Vertices of a patch (lower-left first, row by row) and the 9×9 matrix
/// `∫_M κ(∇φ_a)·κ(∇φ_b)`.
fn patch_stiffness_fluctuation(
    mesh: &StructuredQuadMesh,
    patch: usize,
    rule: &GaussRule,
) -> ([usize; 9], [[f64; 9]; 9]) {
    let cells = mesh.patch_cells(patch);
    let base = mesh.cell_vertices(cells[0])[0];
    let stride = mesh.nx() + 1;
    let mut verts = [0usize; 9];
    for j in 0..3 {
        for i in 0..3 {
            verts[3 * j + i] = base + j * stride + i;
        }
    }
    // local (3×3 lattice) index of each cell corner
    let offsets = [(0, 0), (1, 0), (0, 1), (1, 1)];
    let corner = [(0, 0), (1, 0), (1, 1), (0, 1)];
    let (hx, hy) = mesh.spacing();
    let jac = 0.25 * hx * hy;
    let mut gram = [[0.0; 9]; 9];
    let mut mean_x = [0.0; 9];
    let mut mean_y = [0.0; 9];
    let mut area = 0.0;
    for (ci, cj) in offsets {
        let local: Vec<usize> = corner.iter().map(|(di, dj)| 3 * (cj + dj) + ci + di).collect();
        for (eta, wy) in rule.iter() {
            for (xi, wx) in rule.iter() {
                let (_, dxi, deta) = q1(xi, eta);
                let w = wx * wy * jac;
                area += w;
                for a in 0..4 {
                    let ga = (dxi[a] * 2.0 / hx, deta[a] * 2.0 / hy);
                    mean_x[local[a]] += w * ga.0;
                    mean_y[local[a]] += w * ga.1;
                    for b in 0..4 {
                        let gb = (dxi[b] * 2.0 / hx, deta[b] * 2.0 / hy);
                        gram[local[a]][local[b]] += w * (ga.0 * gb.0 + ga.1 * gb.1);
                    }
                }
            }
        }
    }
    let mut s = [[0.0; 9]; 9];
    for a in 0..9 {
        for b in 0..9 {
            s[a][b] = gram[a][b] - (mean_x[a] * mean_x[b] + mean_y[a] * mean_y[b]) / area;
        }
    }
    (verts, s)
}

/// Convenience wrapper: assemble for a concrete permeability field.
pub fn assemble_darcy(
    mesh: &StructuredQuadMesh,
    perm: &PermeabilityField,
    source: &SourceField,
    lps: LpsWeights,
) -> Result<DarcySystem, DarcyError> {
    DarcyAssembler::from_field(mesh, perm, source, lps)?.system(&perm.flat_entries())
}

/// Sparse LU of a [`DarcySystem`] with residual-checked solves.
pub struct Factorization {
    lu: Lu<usize, f64>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    rel_tol: f64,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization").field("n", &self.rows.len()).finish()
    }
}

impl Factorization {
    fn new(system: &DarcySystem, symbolic: Option<&SymbolicLu<usize>>) -> Result<Self, DarcyError> {
        faer::set_global_parallelism(faer::Par::Seq);
        let lu = match symbolic {
            Some(s) => Lu::try_new_with_symbolic(s.clone(), system.matrix.as_ref()),
            None => system.matrix.sp_lu(),
        }
        .map_err(|e| DarcyError::Factorization(format!("{e:?}")))?;
        Ok(Self { lu, rows: system.rows.clone(), cols: system.cols.clone(), vals: system.vals.clone(), rel_tol: 1e-10 })
    }

    pub fn with_tolerance(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    fn residual(&self, b: &[f64], x: &[f64], transpose: bool) -> Vec<f64> {
        let mut r = b.to_vec();
        for ((&i, &j), &v) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            if transpose {
                r[j] -= v * x[i];
            } else {
                r[i] -= v * x[j];
            }
        }
        r
    }

    fn raw(&self, b: &[f64], transpose: bool) -> Vec<f64> {
        let mut m = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        if transpose {
            self.lu.solve_transpose_in_place(m.as_mut());
        } else {
            self.lu.solve_in_place(m.as_mut());
        }
        (0..b.len()).map(|i| m[(i, 0)]).collect()
    }

    fn solve_impl(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>, DarcyError> {
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = self.raw(b, transpose);
        let mut rel = f64::INFINITY;
        for _ in 0..4 {
            let r = self.residual(b, &x, transpose);
            rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
            if rel <= self.rel_tol {
                return Ok(x);
            }
            let dx = self.raw(&r, transpose);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        let r = self.residual(b, &x, transpose);
        let last = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        if last <= self.rel_tol {
            Ok(x)
        } else {
            Err(DarcyError::NotConverged { residual: last.min(rel) })
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, DarcyError> {
        self.solve_impl(b, false)
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>, DarcyError> {
        self.solve_impl(b, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darcy::Rect;

    fn entry(sys: &DarcySystem, r: usize, c: usize) -> f64 {
        sys.rows.iter().zip(&sys.cols).zip(&sys.vals).filter(|((&i, &j), _)| i == r && j == c).map(|(_, v)| v).sum()
    }

    #[test]
    fn hand_assembled_mass_entries() {
        let mesh = StructuredQuadMesh::new(2, 2, Rect::unit()).unwrap();
        let perm = PermeabilityField::constant(Rect::unit(), 2.0, 3.0).unwrap();
        let lps = LpsWeights { velocity: 0.0, pressure: 0.0 };
        let sys = assemble_darcy(&mesh, &perm, &SourceField::Zero, lps).unwrap();
        let d = sys.dofs;
        // centre vertex: four cells, each contributing h²·4/36
        assert!((entry(&sys, d.ux(4), d.ux(4)) - 2.0 / 9.0).abs() < 1e-14);
        assert!((entry(&sys, d.uy(4), d.uy(4)) - 1.0 / 3.0).abs() < 1e-14);
        // edge (4, 1) shared by two cells, each h²·2/36
        assert!((entry(&sys, d.ux(4), d.ux(1)) - 2.0 / 36.0).abs() < 1e-14);
        // diagonal neighbour (4, 0) in one cell, h²/36
        assert!((entry(&sys, d.uy(4), d.uy(0)) - 3.0 / 144.0).abs() < 1e-14);
        // divergence coupling: ∫ φ_4 ∂x φ_5 over the two cells right of the centre
        assert!((entry(&sys, d.p(4), d.ux(5)) - 1.0 / 6.0).abs() < 1e-14);
        assert!((entry(&sys, d.ux(4), d.p(5)) + entry(&sys, d.p(5), d.ux(4))).abs() < 1e-14);
    }

    #[test]
    fn stabilization_blocks_are_symmetric() {
        let mesh = StructuredQuadMesh::new(4, 4, Rect::new(0.0, 0.0, 2.0, 1.0)).unwrap();
        let rule = GaussRule::new(2);
        for p in 0..mesh.num_patches() {
            let (_, s) = patch_stiffness_fluctuation(&mesh, p, &rule);
            for a in 0..9 {
                let row: f64 = s[a].iter().sum();
                assert!(row.abs() < 1e-12, "constants lie in the kernel");
                for b in 0..9 {
                    assert!((s[a][b] - s[b][a]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn stabilization_kills_linear_fields() {
        // gradients of linear functions are constant, so their fluctuation vanishes
        let mesh = StructuredQuadMesh::new(2, 2, Rect::unit()).unwrap();
        let (verts, s) = patch_stiffness_fluctuation(&mesh, 0, &GaussRule::new(2));
        let lin: Vec<f64> = verts
            .iter()
            .map(|&v| {
                let (x, y) = mesh.vertex_coords(v);
                2.0 * x - 3.0 * y
            })
            .collect();
        for a in 0..9 {
            let r: f64 = (0..9).map(|b| s[a][b] * lin[b]).sum();
            assert!(r.abs() < 1e-13);
        }
    }

    #[test]
    fn matrix_is_affine_in_parameters() {
        let mesh = StructuredQuadMesh::new(4, 4, Rect::unit()).unwrap();
        let perm = PermeabilityField::uniform_grid(Rect::unit(), 2, 1, vec![[1.0, 1.0]; 2]).unwrap();
        let asm =
            DarcyAssembler::from_field(&mesh, &perm, &SourceField::manufactured(), LpsWeights::default()).unwrap();
        let q0 = [1.0, 2.0, 3.0, 4.0];
        let dq = [0.5, -0.25, 0.1, 0.7];
        let q1: Vec<f64> = q0.iter().zip(&dq).map(|(a, b)| a + b).collect();
        let x: Vec<f64> = (0..asm.dofs().len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let a0 = asm.system(&q0).unwrap().apply(&x);
        let a1 = asm.system(&q1).unwrap().apply(&x);
        let d = asm.param_action(&dq, &x);
        for i in 0..x.len() {
            assert!((a1[i] - a0[i] - d[i]).abs() < 1e-13);
        }
        let y: Vec<f64> = (0..x.len()).map(|i| (i as f64 * 0.11).cos()).collect();
        let lhs: f64 = y.iter().zip(&d).map(|(a, b)| a * b).sum();
        let rhs: f64 = asm.param_action_transpose(&dq, &y).iter().zip(&x).map(|(a, b)| a * b).sum();
        let bil: f64 = asm.param_bilinear(&y, &x).iter().zip(&dq).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 && (lhs - bil).abs() < 1e-12);
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        let mesh = StructuredQuadMesh::new(2, 2, Rect::unit()).unwrap();
        let perm = PermeabilityField::constant(Rect::unit(), 1.0, 1.0).unwrap();
        let asm = DarcyAssembler::from_field(&mesh, &perm, &SourceField::Zero, LpsWeights::default()).unwrap();
        assert!(asm.system(&[1.0]).is_err());
        assert!(asm.system(&[1.0, -1.0]).is_err());
    }
}
