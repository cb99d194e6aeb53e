use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::voxel::VoxelGrid;
use super::PoreError;
use crate::linalg::{self, max_abs, norm2};

/// Solver settings for [`solve_stokes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StokesOptions {
    /// Dynamic viscosity μ in Pa·s.
    pub viscosity: f64,
    /// Imposed pressure gradient G in Pa/m, acting as a body force along x.
    pub forcing: f64,
    /// Bound on both the relative momentum residual and the relative
    /// divergence.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for StokesOptions {
    fn default() -> Self {
        Self { viscosity: 1e-3, forcing: 0.002, tol: 1e-8, max_iter: 50_000 }
    }
}

/// Steady Stokes solution on the staggered grid.
///
/// `velocity[d * n + c]` is the component along axis `d` on the face between
/// cell `c - e_d` and cell `c` (its lower face). Pressure lives at cell
/// centres and has zero mean on every connected flowing region; it is zero in
/// solid and stagnant cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesField {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub viscosity: f64,
    pub forcing: f64,
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub iterations: usize,
    pub momentum_residual: f64,
    pub divergence: f64,
    pub history: Vec<f64>,
}

impl StokesField {
    pub fn num_cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        let n = self.num_cells();
        &self.velocity[axis * n..(axis + 1) * n]
    }

    /// Streamwise velocity interpolated to cell centres.
    pub fn cell_centred_x(&self) -> Vec<f64> {
        let [nx, _, _] = self.dims;
        let u = self.component(0);
        (0..self.num_cells())
            .map(|c| {
                let i = c % nx;
                let up = if i + 1 == nx { c + 1 - nx } else { c + 1 };
                0.5 * (u[c] + u[up])
            })
            .collect()
    }

    /// Largest |∇·u| over all cells, in 1/s.
    pub fn max_divergence(&self) -> f64 {
        let n = self.num_cells();
        let st = Stencil::new(self.dims, self.spacing);
        let mut div = vec![0.0; n];
        st.divergence(&self.velocity, &mut div);
        max_abs(&div)
    }
}

/// Index arithmetic for the periodic grid.
#[derive(Clone, Copy)]
struct Stencil {
    dims: [usize; 3],
    spacing: [f64; 3],
}

impl Stencil {
    fn new(dims: [usize; 3], spacing: [f64; 3]) -> Self {
        Self { dims, spacing }
    }

    fn n(&self) -> usize {
        self.dims.iter().product()
    }

    fn slab(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    /// Neighbours of cell `(i, j, k)` along each axis: `[[minus, plus]; 3]`.
    #[inline]
    fn neighbours(&self, i: usize, j: usize, k: usize) -> [[usize; 2]; 3] {
        let [nx, ny, nz] = self.dims;
        let s = nx * ny;
        let c = i + nx * j + s * k;
        let im = if i == 0 { c + nx - 1 } else { c - 1 };
        let ip = if i + 1 == nx { c + 1 - nx } else { c + 1 };
        let jm = if j == 0 { c + s - nx } else { c - nx };
        let jp = if j + 1 == ny { c + nx - s } else { c + nx };
        let km = if k == 0 { c + s * (nz - 1) } else { c - s };
        let kp = if k + 1 == nz { c - s * (nz - 1) } else { c + s };
        [[im, ip], [jm, jp], [km, kp]]
    }

    /// `out = ∇·u` at cell centres.
    fn divergence(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n();
        let [nx, ny, _] = self.dims;
        let h = self.spacing;
        out.par_chunks_mut(self.slab()).enumerate().for_each(|(k, slab)| {
            for j in 0..ny {
                for i in 0..nx {
                    let nb = self.neighbours(i, j, k);
                    let c = i + nx * (j + ny * k);
                    let mut s = 0.0;
                    for d in 0..3 {
                        s += (u[d * n + nb[d][1]] - u[d * n + c]) / h[d];
                    }
                    slab[i + nx * j] = s;
                }
            }
        });
    }
}

const NONE: u32 = u32::MAX;

/// Discrete Stokes operator on the open faces and flowing cells only.
///
/// Vectors are laid out as `[velocity (nv) | 0 | pressure (np)]`; the slot
/// at `nv` always holds zero and stands in for closed faces in the stencils.
struct StokesSystem {
    nv: usize,
    np: usize,
    /// Start of each axis' faces in the velocity block.
    axis_start: [usize; 4],
    face_nb: Vec<[u32; 6]>,
    face_p: Vec<[u32; 2]>,
    diag: Vec<f64>,
    cell_faces: Vec<[u32; 6]>,
    face_cell: Vec<u32>,
    pressure_cell: Vec<u32>,
    coef: [f64; 3],
    inv_h: [f64; 3],
    viscosity: f64,
}

impl StokesSystem {
    fn new(grid: &VoxelGrid, active: &[bool], viscosity: f64) -> Self {
        let st = Stencil::new(grid.dims, grid.spacing);
        let n = st.n();
        let [nx, ny, nz] = grid.dims;
        let coef = [0, 1, 2].map(|e| viscosity / (grid.spacing[e] * grid.spacing[e]));
        let inv_h = [0, 1, 2].map(|e| 1.0 / grid.spacing[e]);
        let cells = || (0..nz).flat_map(move |k| (0..ny).flat_map(move |j| (0..nx).map(move |i| (i, j, k))));

        let mut fidx = vec![vec![NONE; n]; 3];
        let mut face_cell = Vec::new();
        let mut axis_start = [0; 4];
        for d in 0..3 {
            axis_start[d] = face_cell.len();
            for (i, j, k) in cells() {
                let c = i + nx * (j + ny * k);
                if active[c] && active[st.neighbours(i, j, k)[d][0]] {
                    fidx[d][c] = face_cell.len() as u32;
                    face_cell.push(c as u32);
                }
            }
        }
        let nv = face_cell.len();
        axis_start[3] = nv;
        let zero = nv as u32;
        let at = |d: usize, c: usize| if fidx[d][c] == NONE { zero } else { fidx[d][c] };

        let mut pidx = vec![NONE; n];
        let mut pressure_cell = Vec::new();
        for (c, a) in active.iter().enumerate() {
            if *a {
                pidx[c] = (nv + 1 + pressure_cell.len()) as u32;
                pressure_cell.push(c as u32);
            }
        }
        let np = pressure_cell.len();

        let mut face_nb = Vec::with_capacity(nv);
        let mut face_p = Vec::with_capacity(nv);
        let mut diag = Vec::with_capacity(nv);
        for d in 0..3 {
            for &c in &face_cell[axis_start[d]..axis_start[d + 1]] {
                let ijk = grid.coords(c as usize);
                let nb = st.neighbours(ijk[0], ijk[1], ijk[2]);
                let mut idx = [zero; 6];
                let mut s = 0.0;
                for e in 0..3 {
                    for side in 0..2 {
                        let f = at(d, nb[e][side]);
                        idx[2 * e + side] = f;
                        s += if f != zero {
                            coef[e]
                        } else if e == d {
                            // the neighbouring face is a wall face with u = 0
                            coef[e]
                        } else {
                            // the wall sits half a cell away
                            2.0 * coef[e]
                        };
                    }
                }
                face_nb.push(idx);
                face_p.push([pidx[nb[d][0]], pidx[c as usize]]);
                diag.push(s);
            }
        }
        let cell_faces = pressure_cell
            .iter()
            .map(|&c| {
                let c = c as usize;
                let ijk = grid.coords(c);
                let nb = st.neighbours(ijk[0], ijk[1], ijk[2]);
                [at(0, c), at(0, nb[0][1]), at(1, c), at(1, nb[1][1]), at(2, c), at(2, nb[2][1])]
            })
            .collect();
        Self { nv, np, axis_start, face_nb, face_p, diag, cell_faces, face_cell, pressure_cell, coef, inv_h, viscosity }
    }

    fn len(&self) -> usize {
        self.nv + 1 + self.np
    }

    /// `[A Gr; Grᵀ 0] [u; p]` with `A = -μΔ` and `Grᵀ = -∇·`.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (yu, rest) = y.split_at_mut(self.nv);
        let (yz, yp) = rest.split_at_mut(1);
        yz[0] = 0.0;
        for d in 0..3 {
            let (lo, hi) = (self.axis_start[d], self.axis_start[d + 1]);
            let c = self.coef;
            let ih = self.inv_h[d];
            yu[lo..hi].par_chunks_mut(CHUNK).enumerate().for_each(|(b, out)| {
                let base = lo + b * CHUNK;
                for (o, v) in out.iter_mut().enumerate() {
                    let f = base + o;
                    let nb = &self.face_nb[f];
                    let pp = &self.face_p[f];
                    let g = |q: u32| x[q as usize];
                    *v = self.diag[f] * x[f]
                        - c[0] * (g(nb[0]) + g(nb[1]))
                        - c[1] * (g(nb[2]) + g(nb[3]))
                        - c[2] * (g(nb[4]) + g(nb[5]))
                        + (g(pp[1]) - g(pp[0])) * ih;
                }
            });
        }
        let ih = self.inv_h;
        yp.par_chunks_mut(CHUNK).enumerate().for_each(|(b, out)| {
            let base = b * CHUNK;
            for (o, v) in out.iter_mut().enumerate() {
                let cf = &self.cell_faces[base + o];
                let g = |q: u32| x[q as usize];
                *v = (g(cf[0]) - g(cf[1])) * ih[0] + (g(cf[2]) - g(cf[3])) * ih[1] + (g(cf[4]) - g(cf[5])) * ih[2];
            }
        });
    }

    /// Jacobi on the velocity block, `μ I` on the pressure block.
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        let (zu, rest) = z.split_at_mut(self.nv);
        let (zz, zp) = rest.split_at_mut(1);
        zz[0] = 0.0;
        zu.par_iter_mut()
            .zip(r[..self.nv].par_iter())
            .zip(self.diag.par_iter())
            .for_each(|((zi, ri), di)| *zi = ri / di);
        let mu = self.viscosity;
        zp.par_iter_mut().zip(r[self.nv + 1..].par_iter()).for_each(|(zi, ri)| *zi = mu * ri);
    }

    fn rhs(&self, forcing: f64) -> Vec<f64> {
        let mut b = vec![0.0; self.len()];
        b[..self.axis_start[1]].iter_mut().for_each(|v| *v = forcing);
        b
    }

    /// Expands a solution vector to full-grid velocity and pressure arrays.
    fn scatter(&self, x: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut velocity = vec![0.0; 3 * n];
        for d in 0..3 {
            for f in self.axis_start[d]..self.axis_start[d + 1] {
                velocity[d * n + self.face_cell[f] as usize] = x[f];
            }
        }
        let mut pressure = vec![0.0; n];
        for (q, &c) in self.pressure_cell.iter().enumerate() {
            pressure[c as usize] = x[self.nv + 1 + q];
        }
        (velocity, pressure)
    }
}

const CHUNK: usize = 4096;

/// Steady Stokes flow `-μΔu + ∇p = G e_x`, `∇·u = 0` in the fluid, periodic
/// in all three axes, with no-slip on the voxel surfaces.
///
/// Velocity and pressure are solved together by preconditioned MINRES on the
/// symmetric saddle-point system. Only fluid connected to its own periodic
/// image along x can carry flow; everything else is at rest. The solve is
/// accepted once the relative momentum residual `‖f - Au - Gr p‖ / ‖f‖` and
/// the relative divergence `max|∇·u| · h_min / max|u|` are both below `tol`.
pub fn solve_stokes(grid: &VoxelGrid, options: &StokesOptions) -> Result<StokesField, PoreError> {
    if !(options.viscosity > 0.0) || !options.forcing.is_finite() || !(options.tol > 0.0) {
        return Err(PoreError::InvalidInput("viscosity and tolerance must be positive".into()));
    }
    let active = grid.percolating_along_x();
    if !active.iter().any(|a| *a) {
        return Err(PoreError::NotPercolating { axis: 'x' });
    }
    let sys = StokesSystem::new(grid, &active, options.viscosity);
    drop(active);
    let b = sys.rhs(options.forcing);
    let mut x = vec![0.0; sys.len()];
    let bnorm = norm2(&b);
    let hmin = grid.spacing.iter().copied().fold(f64::INFINITY, f64::min);
    let mut history = Vec::new();
    let mut iterations = 0;
    // MINRES measures its residual relative to the start of each run, so
    // restarts only need to gain another digit
    let mut inner_tol = 0.1 * options.tol;
    let mut ax = vec![0.0; sys.len()];
    loop {
        let out = linalg::minres(
            |v, w| sys.apply(v, w),
            |r, z| sys.precondition(r, z),
            &b,
            &mut x,
            inner_tol,
            options.max_iter - iterations,
        );
        iterations += out.iterations;
        history.extend(out.history);

        sys.apply(&x, &mut ax);
        let res: f64 = b[..sys.nv].iter().zip(&ax[..sys.nv]).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum();
        let momentum = if bnorm > 0.0 { res.sqrt() / bnorm } else { 0.0 };
        let umax = max_abs(&x[..sys.nv]);
        let divergence = if umax > 0.0 { max_abs(&ax[sys.nv + 1..]) * hmin / umax } else { 0.0 };
        history.push(momentum.max(divergence));
        if momentum <= options.tol && divergence <= options.tol {
            let p = &mut x[sys.nv + 1..];
            let mean = p.iter().sum::<f64>() / p.len() as f64;
            p.iter_mut().for_each(|v| *v -= mean);
            let (velocity, pressure) = sys.scatter(&x, grid.len());
            return Ok(StokesField {
                dims: grid.dims,
                spacing: grid.spacing,
                viscosity: options.viscosity,
                forcing: options.forcing,
                velocity,
                pressure,
                iterations,
                momentum_residual: momentum,
                divergence,
                history,
            });
        }
        if iterations >= options.max_iter || out.iterations == 0 {
            return Err(PoreError::NotConverged { iterations, momentum, divergence, history });
        }
        inner_tol = 0.1;
    }
}

/// Mean streamwise velocity in a square duct of side `a` driven by `G`,
/// from the Fourier series solution of the Poisson problem on the section.
pub fn duct_mean_velocity(a: f64, viscosity: f64, forcing: f64) -> f64 {
    let mut s = 0.0;
    let mut m = 1usize;
    while m < 400 {
        let mf = m as f64;
        s += (mf * std::f64::consts::PI / 2.0).tanh() / mf.powi(5);
        m += 2;
    }
    forcing * a * a / (12.0 * viscosity) * (1.0 - 192.0 / std::f64::consts::PI.powi(5) * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::pore::pack::{hexagonal_pack, SpherePack};
    use crate::pore::voxel::{voxelize, DEFAULT_MEMORY_CAP};

    /// Square duct along x: layers `j = 0` and `k = 0` are solid, so the
    /// periodic section is an `(n - 1)²` open square.
    pub(crate) fn duct(nx: usize, n: usize, h: f64) -> VoxelGrid {
        let mut g = VoxelGrid::open([nx, n, n], [h; 3]);
        for c in 0..g.len() {
            let [_, j, k] = g.coords(c);
            if j == 0 || k == 0 {
                g.solid[c] = true;
            }
        }
        g
    }

    #[test]
    fn operator_is_symmetric() {
        let p = hexagonal_pack(1.0).unwrap();
        let g = voxelize(&p, 6, DEFAULT_MEMORY_CAP).unwrap();
        let sys = StokesSystem::new(&g, &g.percolating_along_x(), 1.3);
        let m = sys.len();
        let mut a: Vec<f64> = (0..m).map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0).collect();
        let mut b: Vec<f64> = (0..m).map(|i| ((i * 11 % 53) as f64 - 26.0) / 3.0).collect();
        a[sys.nv] = 0.0;
        b[sys.nv] = 0.0;
        let mut aa = vec![0.0; m];
        let mut ab = vec![0.0; m];
        sys.apply(&a, &mut aa);
        sys.apply(&b, &mut ab);
        let l = dot(&aa, &b);
        let r = dot(&a, &ab);
        assert!((l - r).abs() <= 1e-12 * l.abs().max(r.abs()), "{l} {r}");

        // the pressure rows are minus the divergence of the velocity block
        let mut u = a.clone();
        u[sys.nv..].iter_mut().for_each(|v| *v = 0.0);
        sys.apply(&u, &mut aa);
        let (vel, _) = sys.scatter(&u, g.len());
        let mut div = vec![0.0; g.len()];
        Stencil::new(g.dims, g.spacing).divergence(&vel, &mut div);
        for (q, &c) in sys.pressure_cell.iter().enumerate() {
            assert!((aa[sys.nv + 1 + q] + div[c as usize]).abs() < 1e-9 * (1.0 + div[c as usize].abs()));
        }
    }

    #[test]
    fn duct_flow_matches_series() {
        let n = 21;
        let h = 1e-4;
        let g = duct(4, n, h);
        let opts = StokesOptions::default();
        let f = solve_stokes(&g, &opts).unwrap();
        let a = (n - 1) as f64 * h;
        let exact = duct_mean_velocity(a, opts.viscosity, opts.forcing);
        let u = f.component(0);
        let open: Vec<f64> = (0..g.len()).filter(|&c| !g.solid[c]).map(|c| u[c]).collect();
        let mean = open.iter().sum::<f64>() / open.len() as f64;
        assert!((mean - exact).abs() / exact < 0.02, "{mean} vs {exact}");
        // fully developed: no transverse flow and no x variation
        assert!(max_abs(f.component(1)) < 1e-8 * max_abs(u));
        assert!(f.max_divergence() * h <= 1e-8 * max_abs(u));
    }

    #[test]
    fn solid_faces_carry_no_flow() {
        let p = hexagonal_pack(1.0).unwrap();
        let g = voxelize(&p, 6, DEFAULT_MEMORY_CAP).unwrap();
        let f = solve_stokes(&g, &StokesOptions::default()).unwrap();
        let n = g.len();
        for d in 0..3 {
            for c in 0..n {
                let other = g.neighbour(c, d, false);
                if g.solid[c] || g.solid[other] {
                    assert_eq!(f.velocity[d * n + c], 0.0);
                }
            }
        }
    }

    #[test]
    fn blocked_geometry_is_reported() {
        let mut g = VoxelGrid::open([4, 4, 4], [1.0; 3]);
        for c in 0..g.len() {
            if g.coords(c)[0] == 2 {
                g.solid[c] = true;
            }
        }
        assert!(matches!(solve_stokes(&g, &StokesOptions::default()), Err(PoreError::NotPercolating { axis: 'x' })));
    }

    #[test]
    fn iteration_cap_reports_history() {
        let p = SpherePack::new([1.0; 3], 0.5, vec![[0.5; 3]]).unwrap();
        let g = voxelize(&p, 8, DEFAULT_MEMORY_CAP).unwrap();
        let opts = StokesOptions { max_iter: 15, ..Default::default() };
        match solve_stokes(&g, &opts) {
            Err(PoreError::NotConverged { iterations, history, .. }) => {
                assert_eq!(iterations, 15);
                assert!(!history.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn series_limits() {
        // the series constant: mean velocity = 0.0351 G a² / μ (to 4 digits)
        let v = duct_mean_velocity(1.0, 1.0, 1.0);
        assert!((v - 0.035144).abs() < 1e-5, "{v}");
    }
}
