//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line; the process fails if
//! any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use porousflow::cli::{
    run_experiment, Artifacts, DarcyForwardParams, Experiment, ExperimentConfig, PackSpec, PfemSweepParams,
    PorePackParams, PorePdfParams, PoreSolveParams,
};
use porousflow::darcy::{
    assemble_darcy, l2_errors, manufactured_solution, solve_state, DarcyAssembler, LpsWeights, PermeabilityField, Rect,
    SolverOptions, SourceField, StructuredQuadMesh,
};
use porousflow::ident::{
    generate_synthetic_data, ConstraintSet, IdentConfig, InverseProblem, ObservationKind, ObservationOperator,
};
use porousflow::linalg::loglog_slope;
use porousflow::pfem::{
    alpha_p, analytic_solution, bar_gamma_p, bar_gamma_p_numeric, max_stable_pe, oscillation_measure, solve_bvp,
    ConvDiff1DProblem,
};
use porousflow::pore::{self, Region, StokesField, StokesOptions, VoxelGrid, DEFAULT_MEMORY_CAP};
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn peclet_thresholds() -> Outcome {
    let published = [(3, 2.322185), (5, 3.646738), (7, 4.971786), (9, 6.297019), (11, 7.622340)];
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (p, pe) in published {
        let got = max_stable_pe(p).map_err(|e| e.to_string())?;
        worst = worst.max((got - pe).abs());
        detail.push(format!("p={p}: {got:.6}"));
    }
    check(worst < 1e-5, format!("{}; max deviation {worst:.1e}", detail.join(", ")))
}

fn condensation_matches_closed_form() -> Outcome {
    let pes = [0.01, 0.1, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0];
    let mut worst: f64 = 0.0;
    let mut offenders = Vec::new();
    for p in 2..=5 {
        for pe in pes {
            let closed = bar_gamma_p(p, pe, 1.0).map_err(|e| e.to_string())?;
            let numeric = bar_gamma_p_numeric(p, pe, 1.0).map_err(|e| e.to_string())?;
            let rel = (closed - numeric).abs() / closed.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            if rel > 1e-10 {
                offenders.push(format!("possible closed-form typo at p={p}, Pe={pe}: rel dev {rel:.1e}"));
            }
        }
    }
    check(offenders.is_empty(), format!("max relative deviation {worst:.1e} {}", offenders.join("; ")))
}

fn peclet_five_demonstration() -> Outcome {
    let (a, gamma, elements) = (2.0, 0.02, 10);
    let problem = ConvDiff1DProblem::boundary_layer(a, gamma, elements);
    let low = solve_bvp(&problem, 1).map_err(|e| e.to_string())?;
    let high = solve_bvp(&problem, 7).map_err(|e| e.to_string())?;
    let osc1 = oscillation_measure(&low.nodal);
    let osc7 = oscillation_measure(&high.nodal);
    let err7 = high
        .nodal
        .iter()
        .enumerate()
        .map(|(j, c)| (c - analytic_solution(a, gamma, j as f64 / elements as f64)).abs())
        .fold(0.0, f64::max);
    let alpha7 = alpha_p(7, problem.mesh_peclet()).map_err(|e| e.to_string())?;
    check(
        osc1 > 0.0 && osc7 == 0.0 && err7 < 1e-3,
        format!(
            "Pe={:.1}: p=1 oscillation {osc1:.3e}; p=7 oscillation {osc7:.3e} (alpha_7 = {alpha7:.7}), max nodal error {err7:.2e}",
            problem.mesh_peclet()
        ),
    )
}

fn even_degrees_never_oscillate() -> Outcome {
    let n = 10_000;
    let mut detail = Vec::new();
    let mut ok = true;
    let mut alpha2_max: f64 = 0.0;
    for p in [2, 4] {
        let mut max: f64 = 0.0;
        for i in 1..=n {
            let a = alpha_p(p, 100.0 * i as f64 / n as f64).map_err(|e| e.to_string())?;
            max = max.max(a);
        }
        ok &= max < 1.0;
        detail.push(format!("max alpha_{p} on grid {max:.10}"));
        if p == 2 {
            alpha2_max = refine_maximum(|pe| alpha_p(2, pe).unwrap(), 1e-3, 100.0);
        }
    }
    let target = 3f64.sqrt() / 2.0;
    ok &= (alpha2_max - target).abs() < 1e-8;
    detail.push(format!("sup alpha_2 = {alpha2_max:.12} vs sqrt(3)/2 = {target:.12}"));
    check(ok, detail.join("; "))
}

/// Maximum of a unimodal function: a coarse scan followed by golden-section
/// search around the best sample.
fn refine_maximum(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 2000;
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let best = (0..=n).max_by(|&i, &j| f(xs[i]).total_cmp(&f(xs[j]))).unwrap();
    let (mut a, mut b) = (xs[best.saturating_sub(1)], xs[(best + 1).min(n)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b)).max(f(xs[best]))
}

fn darcy_convergence() -> Outcome {
    let perm = PermeabilityField::constant(Rect::unit(), 1.0, 1.0).map_err(|e| e.to_string())?;
    let (mut h, mut eu, mut ep) = (Vec::new(), Vec::new(), Vec::new());
    for n in [16, 32, 64, 128] {
        let mesh = StructuredQuadMesh::new(n, n, Rect::unit()).map_err(|e| e.to_string())?;
        let sys = assemble_darcy(&mesh, &perm, &SourceField::manufactured(), LpsWeights::default())
            .map_err(|e| e.to_string())?;
        let state = solve_state(&sys, SolverOptions::default()).map_err(|e| e.to_string())?;
        let (u, p) = l2_errors(&mesh, &state, manufactured_solution);
        h.push(1.0 / n as f64);
        eu.push(u);
        ep.push(p);
    }
    let (su, sp) = (loglog_slope(&h, &eu), loglog_slope(&h, &ep));
    check(su >= 0.9 && sp >= 0.9, format!("L2 orders: velocity {su:.3}, pressure {sp:.3}"))
}

fn adjoint_derivatives() -> Outcome {
    let mesh = StructuredQuadMesh::new(16, 16, Rect::unit()).map_err(|e| e.to_string())?;
    let partition = PermeabilityField::grid_partition(Rect::unit(), 2, 2);
    let subdomains = PermeabilityField::new(partition.clone(), vec![[1.0, 1.0]; 4])
        .and_then(|f| f.cell_subdomains(&mesh))
        .map_err(|e| e.to_string())?;
    let asm = DarcyAssembler::new(&mesh, subdomains, 4, &SourceField::manufactured(), LpsWeights::default())
        .map_err(|e| e.to_string())?;
    let obs = ObservationOperator::point_set(&mesh, &ObservationOperator::lattice_points(&mesh, 8, 4))
        .map_err(|e| e.to_string())?;
    let q_ref = vec![1.7, 2.4, 3.1, 1.3, 2.2, 1.1, 4.0, 2.8];
    let z = generate_synthetic_data(&asm, &obs, &q_ref.into(), 0.0, 0).map_err(|e| e.to_string())?;
    let problem = InverseProblem::new(asm, partition, obs, z, 1e-3, ConstraintSet::lower_only(8, 1.0))
        .map_err(|e| e.to_string())?;
    let q = vec![2.0, 1.5, 2.5, 3.0, 1.8, 1.4, 3.3, 2.1];
    let n = q.len();

    let g = problem.reduced_gradient(&q).map_err(|e| e.to_string())?;
    let step = 1e-5;
    let mut grad_err: f64 = 0.0;
    let gnorm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for k in 0..n {
        let mut a = q.clone();
        let mut b = q.clone();
        a[k] += step;
        b[k] -= step;
        let fd = (problem.reduced_cost(&a).unwrap() - problem.reduced_cost(&b).unwrap()) / (2.0 * step);
        grad_err = grad_err.max((fd - g[k]).abs() / gnorm);
    }

    let eval = problem.evaluate(&q).map_err(|e| e.to_string())?;
    let d1: Vec<f64> = (0..n).map(|i| ((i * 7 % 5) as f64 - 2.0) / 3.0).collect();
    let d2: Vec<f64> = (0..n).map(|i| ((i * 3 % 7) as f64 - 3.0) / 4.0).collect();
    let h1 = eval.hessian_vector_product(&d1).map_err(|e| e.to_string())?;
    let h2 = eval.hessian_vector_product(&d2).map_err(|e| e.to_string())?;
    let a: f64 = h1.iter().zip(&d2).map(|(x, y)| x * y).sum();
    let b: f64 = h2.iter().zip(&d1).map(|(x, y)| x * y).sum();
    let sym = (a - b).abs() / a.abs().max(b.abs());

    let eps = 1e-4;
    let qp: Vec<f64> = q.iter().zip(&d1).map(|(x, d)| x + eps * d).collect();
    let qm: Vec<f64> = q.iter().zip(&d1).map(|(x, d)| x - eps * d).collect();
    let gp = problem.reduced_gradient(&qp).map_err(|e| e.to_string())?;
    let gm = problem.reduced_gradient(&qm).map_err(|e| e.to_string())?;
    let hnorm = h1.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let hv_err = (0..n).map(|k| ((gp[k] - gm[k]) / (2.0 * eps) - h1[k]).abs() / hnorm).fold(0.0, f64::max);

    check(
        grad_err < 1e-6 && sym < 1e-8 && hv_err < 1e-5,
        format!("gradient vs differences {grad_err:.1e}, Hessian symmetry {sym:.1e}, Hessian vs differenced gradients {hv_err:.1e}"),
    )
}

fn identification_fidelity() -> Outcome {
    let mut errors = Vec::new();
    for kind in [ObservationKind::Identity, ObservationKind::Points] {
        let report = IdentConfig::new(kind).run().map_err(|e| e.to_string())?;
        errors.push(report.relative_errors);
    }
    let (id, pts) = (errors[0], errors[1]);
    check(
        id[0] < 1e-3 && id[1] < 1e-3 && pts[0] > id[0] && pts[1] > id[1],
        format!(
            "identity errors ({:.2e}, {:.2e}), 32-point errors ({:.2e}, {:.2e}); published anchors (0.0655, 0.00565) and (0.181, 0.0634) come from unpublished reference data",
            id[0], id[1], pts[0], pts[1]
        ),
    )
}

/// Square duct of `open` cells across; one solid layer in y and z separates
/// it from its periodic images.
fn duct(nx: usize, open: usize, h: f64) -> VoxelGrid {
    let n = open + 1;
    let mut grid = VoxelGrid::open([nx, n, n], [h; 3]);
    for c in 0..grid.len() {
        let [_, j, k] = grid.coords(c);
        grid.solid[c] = j == 0 || k == 0;
    }
    grid
}

fn max_relative_deviation(a: &StokesField, b: &StokesField, scale: f64) -> f64 {
    let umax = b.velocity.iter().map(|v| v.abs()).fold(0.0, f64::max);
    a.velocity.iter().zip(&b.velocity).map(|(x, y)| (x * scale - y).abs()).fold(0.0, f64::max) / umax
}

fn pore_physics() -> Outcome {
    let (mu, g) = (1e-3, 0.002);
    let opts = |viscosity: f64, forcing: f64| StokesOptions { viscosity, forcing, ..StokesOptions::default() };

    let side = 1e-3;
    let open = 40;
    let grid = duct(4, open, side / open as f64);
    let field = pore::solve_stokes(&grid, &opts(mu, g)).map_err(|e| e.to_string())?;
    let mean = pore::intrinsic_velocity(&field, &grid);
    let exact = pore::duct_mean_velocity(side, mu, g);
    let duct_err = (mean - exact).abs() / exact;
    let a_ok = duct_err < 0.02;

    let pack = pore::hexagonal_pack(2e-3).map_err(|e| e.to_string())?;
    let hex = pore::voxelize(&pack, 10, DEFAULT_MEMORY_CAP).map_err(|e| e.to_string())?;
    let base = pore::solve_stokes(&hex, &opts(mu, g)).map_err(|e| e.to_string())?;
    let forced = pore::solve_stokes(&hex, &opts(mu, 3.0 * g)).map_err(|e| e.to_string())?;
    let viscous = pore::solve_stokes(&hex, &opts(4.0 * mu, g)).map_err(|e| e.to_string())?;
    let lin = max_relative_deviation(&base, &forced, 3.0).max(max_relative_deviation(&base, &viscous, 0.25));
    let b_ok = lin < 1e-6;

    let spec = PackSpec::Random { diameter: 2e-3, box_diameters: [6.0; 3], options: Default::default() };
    let params = PorePdfParams {
        pack: spec,
        realizations: 5,
        cells_per_diameter: 20,
        normalized: true,
        regions: vec![Region::Total, Region::Inner],
        ..PorePdfParams::default()
    };
    let started = Instant::now();
    let artifacts = run_experiment(&ExperimentConfig::new(Experiment::PorePdf(params))).map_err(|e| e.to_string())?;
    let summary: Value = serde_json::from_slice(artifacts.get("summary.json").unwrap()).unwrap();
    let ratios: Vec<f64> = summary["realizations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["permeability"].as_f64().unwrap() / r["blake_kozeny"].as_f64().unwrap())
        .collect();
    let porosities: Vec<f64> =
        summary["realizations"].as_array().unwrap().iter().map(|r| r["porosity"].as_f64().unwrap()).collect();
    let c_ok = ratios.len() == 5 && ratios.iter().all(|r| (0.5..=2.0).contains(r));

    let total = &summary["regions"][0];
    let inner = &summary["regions"][1];
    let skew = total["skewness"].as_f64().unwrap();
    let neg = total["negative_fraction"].as_f64().unwrap();
    let mode = total["mode_over_intrinsic"].as_f64().unwrap();
    let d_ok = skew > 0.0 && neg > 0.0 && neg < 0.05 && mode < 1.0;

    let detail = format!(
        "(a) duct error {:.2}% {}; (b) linearity deviation {lin:.1e} {}; (c) k/BK per seed {:?} at porosity {:?} {}; \
         (d) ensemble skewness {skew:.3}, negative mass {:.2}%, mode/U_i {mode:.3} (inner: skewness {:.3}, negative {:.2}%) {}; \
         random-pack ensemble took {:.0?}",
        100.0 * duct_err,
        pass_word(a_ok),
        pass_word(b_ok),
        ratios.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        porosities.iter().map(|e| (e * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        pass_word(c_ok),
        100.0 * neg,
        inner["skewness"].as_f64().unwrap_or(f64::NAN),
        100.0 * inner["negative_fraction"].as_f64().unwrap_or(f64::NAN),
        pass_word(d_ok),
        started.elapsed()
    );
    check(a_ok && b_ok && c_ok && d_ok, detail)
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "failed"
    }
}

fn manifest_digest(cfg: &ExperimentConfig, threads: usize) -> Result<String, String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    let artifacts: Artifacts = pool.install(|| run_experiment(cfg)).map_err(|e| e.to_string())?;
    let config = serde_json::to_value(cfg).unwrap();
    Ok(artifacts.manifest(cfg.experiment.kind(), cfg.seed, config).digest())
}

fn determinism() -> Outcome {
    let random4 = PackSpec::Random { diameter: 2e-3, box_diameters: [4.0; 3], options: Default::default() };
    let configs = vec![
        Experiment::PfemSweep(PfemSweepParams { pe_points: 50, ..PfemSweepParams::default() }),
        Experiment::DarcyForward(DarcyForwardParams { nx: 16, ny: 16, ..DarcyForwardParams::default() }),
        Experiment::PorePack(PorePackParams { pack: random4.clone(), realizations: 3 }),
        Experiment::PoreSolve(PoreSolveParams {
            cells_per_diameter: 10,
            dump_field: true,
            ..PoreSolveParams::default()
        }),
        Experiment::PorePdf(PorePdfParams {
            pack: random4,
            realizations: 2,
            cells_per_diameter: 8,
            ..PorePdfParams::default()
        }),
    ];
    let mut detail = Vec::new();
    let mut ok = true;
    for experiment in configs {
        let cfg = ExperimentConfig { seed: 11, ..ExperimentConfig::new(experiment) };
        let first = manifest_digest(&cfg, 1)?;
        let again = manifest_digest(&cfg, 1)?;
        let threaded = manifest_digest(&cfg, 3)?;
        let same = first == again && first == threaded;
        ok &= same;
        detail.push(format!("{} {}", cfg.experiment.kind(), if same { "identical" } else { "differs" }));
    }
    check(ok, detail.join(", "))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("Peclet thresholds", peclet_thresholds),
        ("condensation matches closed form", condensation_matches_closed_form),
        ("Pe = 5 demonstration", peclet_five_demonstration),
        ("even-degree stability", even_degrees_never_oscillate),
        ("Darcy forward convergence", darcy_convergence),
        ("adjoint correctness", adjoint_derivatives),
        ("identification fidelity", identification_fidelity),
        ("pore-scale physics", pore_physics),
        ("determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = i + 1;
        if only.is_some_and(|o| o != number) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = started.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {number} ({name}): PASS [{elapsed:.1?}] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {number} ({name}): FAIL [{elapsed:.1?}] {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
