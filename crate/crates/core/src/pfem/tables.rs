//! Data tables behind the truncation-error, α_p, threshold and profile plots.

use std::fmt::Write;

use super::{
    alpha_p, analytic_solution, bar_gamma_exact, bar_gamma_p_numeric, min_degree_for_pe, solve_bvp, ConvDiff1DProblem,
    PfemError,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub pe: f64,
    pub p: usize,
    pub bar_gamma_p: f64,
    pub delta_gamma_p: f64,
    pub alpha_p: f64,
}

/// Γ̄_p, ΔΓ_p and α_p for every `(p, Pe)` pair.
pub fn sweep(degrees: &[usize], pes: &[f64], gamma_eff: f64) -> Result<Vec<SweepRow>, PfemError> {
    let mut rows = Vec::with_capacity(degrees.len() * pes.len());
    for &p in degrees {
        for &pe in pes {
            let bg = bar_gamma_p_numeric(p, pe, gamma_eff)?;
            rows.push(SweepRow {
                pe,
                p,
                // Adding zero turns a negative zero into +0 so the tables print "0".
                bar_gamma_p: bg + 0.0,
                delta_gamma_p: bar_gamma_exact(pe, gamma_eff) - bg,
                alpha_p: alpha_p(p, pe)?,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("Pe,p,bar_gamma_p,delta_gamma_p,alpha_p\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.pe, r.p, r.bar_gamma_p, r.delta_gamma_p, r.alpha_p);
    }
    s
}

/// `Pe_k = lo + k (hi - lo) / (n - 1)`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// `(Pe, minimum odd degree)` pairs.
pub fn min_degree_csv(pes: &[f64]) -> Result<String, PfemError> {
    let mut s = String::from("Pe,min_p\n");
    for &pe in pes {
        let _ = writeln!(s, "{},{}", pe, min_degree_for_pe(pe)?);
    }
    Ok(s)
}

/// `(x, c_h, c_exact)` on `samples` evenly spaced points plus the nodes.
pub fn profile_csv(problem: &ConvDiff1DProblem, p: usize, samples: usize) -> Result<String, PfemError> {
    let sol = solve_bvp(problem, p)?;
    let mut s = String::from("x,c_h,c_exact,is_node\n");
    let n = problem.elements;
    let mut xs: Vec<(f64, bool)> = linspace(0.0, 1.0, samples.max(2)).into_iter().map(|x| (x, false)).collect();
    xs.extend((0..=n).map(|j| (j as f64 / n as f64, true)));
    xs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (x, node) in xs {
        let ch = if node { sol.nodal[(x * n as f64).round() as usize] } else { sol.eval(x) };
        let ce = analytic_solution(problem.velocity, problem.diffusivity, x);
        let _ = writeln!(s, "{},{},{},{}", x, ch, ce, u8::from(node));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_has_header_and_rows() {
        let rows = sweep(&[2, 3], &[0.5, 1.0, 2.0], 1.0).unwrap();
        assert_eq!(rows.len(), 6);
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("Pe,p,bar_gamma_p,delta_gamma_p,alpha_p\n"));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn min_degree_table_is_nondecreasing() {
        let csv = min_degree_csv(&linspace(0.5, 7.5, 15)).unwrap();
        let ps: Vec<usize> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*ps.last().unwrap(), 11);
    }
}
