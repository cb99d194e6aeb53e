use super::{CondensedElement, CondensedTridiagonal, HierarchicBasis, PfemError};

/// Numerical diffusivity that makes linear Galerkin nodally exact:
/// `Γ̄ = (coth Pe - 1/Pe) Γ Pe`, extended continuously by 0 at `Pe = 0`.
pub fn bar_gamma_exact(pe: f64, gamma_eff: f64) -> f64 {
    let x = pe.abs();
    if x < 0.05 {
        // x coth x - 1 = x²/3 - x⁴/45 + 2x⁶/945 - x⁸/4725 + 2x¹⁰/93555
        let x2 = x * x;
        let s = x2 * (1.0 / 3.0 + x2 * (-1.0 / 45.0 + x2 * (2.0 / 945.0 + x2 * (-1.0 / 4725.0 + x2 * 2.0 / 93555.0))));
        return gamma_eff * s;
    }
    gamma_eff * (x / x.tanh() - 1.0)
}

/// Closed-form Γ̄_p for `p = 2..=5`.
pub fn bar_gamma_p(p: usize, pe: f64, gamma_eff: f64) -> Result<f64, PfemError> {
    let pe2 = pe * pe;
    let pe4 = pe2 * pe2;
    let g = gamma_eff;
    match p {
        2 => Ok(pe2 * g / 3.0),
        3 => Ok(5.0 * pe2 * g / (pe2 + 15.0)),
        4 => Ok(g * (pe4 + 35.0 * pe2) / (10.0 * pe2 + 105.0)),
        5 => Ok(14.0 * g * (4.0 * pe4 + 90.0 * pe2) / (4.0 * pe4 + 420.0 * pe2 + 3780.0)),
        _ => Err(PfemError::UnsupportedDegree(p)),
    }
}

/// Γ̄_p by condensing a single element of degree `p` (any `p >= 1`).
pub fn bar_gamma_p_numeric(p: usize, pe: f64, gamma_eff: f64) -> Result<f64, PfemError> {
    let stencil = condensed_stencil(p, pe, gamma_eff)?;
    // Without convection the bubbles decouple exactly; drop the round-off.
    Ok(if pe == 0.0 { 0.0 } else { stencil.bar_gamma })
}

fn condensed_stencil(p: usize, pe: f64, gamma_eff: f64) -> Result<CondensedTridiagonal, PfemError> {
    if p < 1 {
        return Err(PfemError::DegreeTooLow { got: p, min: 1 });
    }
    if !(gamma_eff > 0.0) || !pe.is_finite() {
        return Err(PfemError::InvalidProblem(format!("need Γ > 0 and finite Pe (Γ = {gamma_eff}, Pe = {pe})")));
    }
    let h = 1.0;
    let u = 2.0 * pe * gamma_eff / h;
    let elem = CondensedElement::new(&HierarchicBasis::new(p), h, 0.0, u, gamma_eff, &|_| 0.0)?;
    Ok(CondensedTridiagonal::from_element(&elem, h, u, gamma_eff))
}

/// `ΔΓ_p = Γ̄ - Γ̄_p`, using the condensed (numeric) Γ̄_p.
pub fn truncation_error(p: usize, pe: f64, gamma_eff: f64) -> Result<f64, PfemError> {
    Ok(bar_gamma_exact(pe, gamma_eff) - bar_gamma_p_numeric(p, pe, gamma_eff)?)
}

/// `α_p = Pe / (1 + Γ̄_p/Γ)`; nodal solutions are oscillation-free iff `α_p < 1`.
pub fn alpha_p(p: usize, pe: f64) -> Result<f64, PfemError> {
    if pe == 0.0 {
        return Ok(0.0);
    }
    let ratio = bar_gamma_p_numeric(p, pe, 1.0)?;
    Ok(pe / (1.0 + ratio))
}

/// Largest mesh Péclet number with `α_p <= 1`, for odd `p`.
pub fn max_stable_pe(p: usize) -> Result<f64, PfemError> {
    if p.is_multiple_of(2) {
        return Err(PfemError::EvenDegree(p));
    }
    if p == 1 {
        return Ok(1.0);
    }
    let f = |pe: f64| alpha_p(p, pe).map(|a| a - 1.0);
    let (mut lo, mut hi) = (1.0, 50.0);
    if f(lo)? >= 0.0 {
        return Err(PfemError::RootNotBracketed(p));
    }
    let mut expansions = 0;
    while f(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 20 {
            return Err(PfemError::RootNotBracketed(p));
        }
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Newton polish with a central-difference slope; stays inside the bracket.
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let step = 1e-6 * x;
        let slope = (f(x + step)? - f(x - step)?) / (2.0 * step);
        let next = x - f(x)? / slope;
        if !(next > lo - 1e-8 && next < hi + 1e-8) {
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Smallest odd degree whose threshold reaches `pe`; 1 for `pe <= 1`.
pub fn min_degree_for_pe(pe: f64) -> Result<usize, PfemError> {
    if pe <= 1.0 {
        return Ok(1);
    }
    let mut p = 3;
    loop {
        if max_stable_pe(p)? >= pe {
            return Ok(p);
        }
        p += 2;
    }
}
