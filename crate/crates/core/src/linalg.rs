//! Reductions and small helpers shared by the iterative solvers.
//!
//! Dot products are summed over fixed-size chunks and then combined in chunk
//! order, so the result does not depend on how many rayon threads run.

use rayon::prelude::*;

const CHUNK: usize = 8192;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.par_chunks(CHUNK)
        .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(yc, xc)| yc.iter_mut().zip(xc).for_each(|(yi, xi)| *yi += alpha * xi));
}

/// `y = x + beta * y`
pub fn xpby(x: &[f64], beta: f64, y: &mut [f64]) {
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(yc, xc)| yc.iter_mut().zip(xc).for_each(|(yi, xi)| *yi = xi + beta * *yi));
}

/// Result of a conjugate-gradient run.
#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned CG for an SPD operator. `x` holds the initial guess on entry.
pub fn pcg<A, P>(apply: A, precond: P, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> CgOutcome
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut d = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = norm2(&r) / bnorm;
    let mut it = 0;
    while rel > rel_tol && it < max_iter {
        apply(&d, &mut q);
        let dq = dot(&d, &q);
        if dq <= 0.0 {
            break;
        }
        let step = rz / dq;
        axpy(step, &d, x);
        axpy(-step, &q, &mut r);
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        xpby(&z, rz_new / rz, &mut d);
        rz = rz_new;
        rel = norm2(&r) / bnorm;
        it += 1;
    }
    CgOutcome { iterations: it, relative_residual: rel, converged: rel <= rel_tol }
}

/// Result of a MINRES run. `history` holds the preconditioned relative
/// residual estimate after every tenth iteration.
#[derive(Debug, Clone)]
pub struct MinresOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Preconditioned MINRES for a symmetric (possibly indefinite or singular
/// but consistent) operator with an SPD preconditioner `precond`, which
/// applies the inverse of the preconditioning matrix. `x` holds the initial
/// guess. Convergence is measured by the residual in the preconditioner norm
/// relative to the initial one.
pub fn minres<A, P>(apply: A, precond: P, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> MinresOutcome
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut r1 = vec![0.0; n];
    apply(x, &mut r1);
    r1.par_iter_mut().zip(b.par_iter()).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut y = vec![0.0; n];
    precond(&r1, &mut y);
    let beta1 = dot(&r1, &y).max(0.0).sqrt();
    let mut history = Vec::new();
    if beta1 == 0.0 {
        return MinresOutcome { iterations: 0, relative_residual: 0.0, converged: true, history };
    }
    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta, mut dbar, mut epsln) = (0.0f64, beta1, 0.0f64, 0.0f64);
    let (mut phibar, mut cs, mut sn) = (beta1, -1.0f64, 0.0f64);
    let mut rel = 1.0;
    let mut it = 0;
    while it < max_iter && rel > rel_tol {
        it += 1;
        let s = 1.0 / beta;
        v.par_iter_mut().zip(y.par_iter()).for_each(|(vi, yi)| *vi = s * yi);
        apply(&v, &mut y);
        if it >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        std::mem::swap(&mut r2, &mut y);
        precond(&r2, &mut y);
        oldb = beta;
        let bb = dot(&r2, &y);
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        beta = bb.max(0.0).sqrt();
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        let inv = 1.0 / gamma;
        w.par_chunks_mut(CHUNK).zip(v.par_chunks(CHUNK)).zip(w1.par_chunks(CHUNK).zip(w2.par_chunks(CHUNK))).for_each(
            |((wc, vc), (ac, bc))| {
                for i in 0..wc.len() {
                    wc[i] = (vc[i] - oldeps * ac[i] - delta * bc[i]) * inv;
                }
            },
        );
        axpy(phi, &w, x);
        rel = phibar / beta1;
        if it % 10 == 0 {
            history.push(rel);
        }
        if beta == 0.0 {
            // the Krylov space is invariant: x is exact
            break;
        }
    }
    MinresOutcome { iterations: it, relative_residual: rel, converged: rel <= rel_tol, history }
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
