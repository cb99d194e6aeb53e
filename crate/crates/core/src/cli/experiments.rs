use std::fmt::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::artifacts::Artifacts;
use super::config::*;
use super::CliError;
use crate::darcy::{
    assemble_darcy, l2_errors, manufactured_solution, solve_state, state_csv, DarcyHeader, PermeabilityField,
    SolverOptions, SourceField, StructuredQuadMesh,
};
use crate::ident::IdentConfig;
use crate::pfem::{self, analytic_solution, max_stable_pe, oscillation_measure, solve_bvp, ConvDiff1DProblem};
use crate::pore::{
    self, Bins, PoreError, Region, SpherePack, StokesField, StokesOptions, VelocityHistogram, VoxelGrid,
};

/// Water density used to turn μ into a kinematic viscosity for `Re`.
pub const WATER_DENSITY: f64 = 1000.0;

/// Runs one experiment and returns its artifacts. Nothing touches the disk.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    match &cfg.experiment {
        Experiment::DarcyForward(p) => darcy_forward(p),
        Experiment::Ident(p) => ident(p, cfg.seed),
        Experiment::PfemSweep(p) => pfem_sweep(p),
        Experiment::PfemSolve(p) => pfem_solve(p),
        Experiment::PorePack(p) => pore_pack(p, cfg.seed),
        Experiment::PoreSolve(p) => pore_solve(p, cfg.seed),
        Experiment::PorePdf(p) => pore_pdf(p, cfg.seed),
    }
}

fn darcy_forward(p: &DarcyForwardParams) -> Result<Artifacts, CliError> {
    let mesh = StructuredQuadMesh::new(p.nx, p.ny, p.domain)?;
    let partition = PermeabilityField::grid_partition(p.domain, p.partition[0], p.partition[1]);
    let entries = p.permeability.clone().unwrap_or_else(|| vec![[1.0, 1.0]; partition.len()]);
    let perm = PermeabilityField::new(partition, entries)?;
    let source = match p.source {
        DarcySource::Zero => SourceField::Zero,
        DarcySource::Manufactured => SourceField::manufactured(),
    };
    let system = assemble_darcy(&mesh, &perm, &source, p.lps)?;
    let state = solve_state(&system, SolverOptions::default())?;

    #[derive(Serialize)]
    struct Summary {
        nx: usize,
        ny: usize,
        unknowns: usize,
        velocity_l2_error: Option<f64>,
        pressure_l2_error: Option<f64>,
    }
    let errors = (p.source == DarcySource::Manufactured).then(|| l2_errors(&mesh, &state, manufactured_solution));
    let mut out = Artifacts::new();
    out.add("state.csv", state_csv(&mesh, &state));
    out.add_json("state.json", &DarcyHeader::new(&mesh, &perm, p.lps));
    out.add_json(
        "summary.json",
        &Summary {
            nx: p.nx,
            ny: p.ny,
            unknowns: system.rhs.len(),
            velocity_l2_error: errors.map(|e| e.0),
            pressure_l2_error: errors.map(|e| e.1),
        },
    );
    Ok(out)
}

fn ident(p: &IdentConfig, seed: u64) -> Result<Artifacts, CliError> {
    let mut cfg = p.clone();
    cfg.seed = seed;
    let report = cfg.run()?;
    let mut out = Artifacts::new();
    let mut q = String::from("subdomain,a,b,a_ref,b_ref\n");
    for (i, (est, truth)) in report.q.chunks(2).zip(report.q_ref.chunks(2)).enumerate() {
        let _ = writeln!(q, "{i},{:e},{:e},{:e},{:e}", est[0], est[1], truth[0], truth[1]);
    }
    let mut hist = String::from("outer,inner,cost,projected_gradient,active,cg_iterations,step_length\n");
    for r in &report.diagnostics.history {
        let _ = writeln!(
            hist,
            "{},{},{:e},{:e},{},{},{:e}",
            r.outer,
            r.inner,
            r.cost,
            r.projected_gradient,
            r.active.len(),
            r.cg_iterations,
            r.step_length
        );
    }
    out.add("parameters.csv", q);
    out.add("history.csv", hist);
    out.add_json("report.json", &report);
    Ok(out)
}

fn pfem_sweep(p: &PfemSweepParams) -> Result<Artifacts, CliError> {
    if p.pe_points == 0 || !(p.pe_min > 0.0) || !(p.pe_max >= p.pe_min) {
        return Err(CliError::Config("need pe_points >= 1 and 0 < pe_min <= pe_max".into()));
    }
    let pes = pfem::tables::linspace(p.pe_min, p.pe_max, p.pe_points);
    let rows = pfem::tables::sweep(&p.degrees, &pes, p.gamma_eff)?;
    let mut thresholds = String::from("p,max_stable_pe\n");
    for &deg in &p.threshold_degrees {
        let _ = writeln!(thresholds, "{deg},{:.9}", max_stable_pe(deg)?);
    }
    let mut out = Artifacts::new();
    out.add("sweep.csv", pfem::tables::sweep_csv(&rows));
    out.add("thresholds.csv", thresholds);
    out.add("min_degree.csv", pfem::tables::min_degree_csv(&pes)?);
    Ok(out)
}

fn pfem_solve(p: &PfemSolveParams) -> Result<Artifacts, CliError> {
    let problem = ConvDiff1DProblem::boundary_layer(p.velocity, p.diffusivity, p.elements);
    #[derive(Serialize)]
    struct Row {
        p: usize,
        mesh_peclet: f64,
        oscillation_measure: f64,
        max_nodal_error: f64,
    }
    let mut rows = Vec::new();
    let mut out = Artifacts::new();
    for &deg in &p.degrees {
        let sol = solve_bvp(&problem, deg)?;
        let max_nodal_error = sol
            .nodal
            .iter()
            .enumerate()
            .map(|(j, c)| (c - analytic_solution(p.velocity, p.diffusivity, j as f64 / p.elements as f64)).abs())
            .fold(0.0, f64::max);
        rows.push(Row {
            p: deg,
            mesh_peclet: problem.mesh_peclet(),
            oscillation_measure: oscillation_measure(&sol.nodal),
            max_nodal_error,
        });
        out.add(format!("profile_p{deg}.csv"), pfem::tables::profile_csv(&problem, deg, p.samples)?);
    }
    out.add_json("summary.json", &rows);
    Ok(out)
}

/// Builds the pack described by `spec`; random packs use `seed`.
pub fn build_pack(spec: &PackSpec, seed: u64) -> Result<SpherePack, CliError> {
    Ok(match spec {
        PackSpec::Hexagonal { diameter } => pore::hexagonal_pack(*diameter)?,
        PackSpec::ClosePacked { diameter, reps } => pore::close_packed_pack(*diameter, *reps)?,
        PackSpec::Random { diameter, box_diameters, options } => {
            pore::random_pack(box_diameters.map(|b| b * diameter), *diameter, seed, options)?
        }
        PackSpec::File { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read pack file {}: {e}", path.display())))?;
            pore::pack_from_json(&text)?
        }
    })
}

/// Seeds of the realizations of `spec`: one per realization for random
/// packs, a single one otherwise.
pub fn realization_seeds(spec: &PackSpec, realizations: usize, seed: u64) -> Vec<u64> {
    let n = if spec.is_random() { realizations.max(1) } else { 1 };
    (0..n as u64).map(|r| seed + r).collect()
}

/// One solved realization.
pub struct Realization {
    pub seed: u64,
    pub pack: SpherePack,
    pub grid: VoxelGrid,
    pub field: StokesField,
}

pub fn solve_realization(
    spec: &PackSpec,
    seed: u64,
    cells_per_diameter: usize,
    stokes: &StokesOptions,
    memory_cap: u64,
) -> Result<Realization, CliError> {
    let pack = build_pack(spec, seed)?;
    let grid = pore::voxelize(&pack, cells_per_diameter, memory_cap)?;
    let field = pore::solve_stokes(&grid, stokes)?;
    Ok(Realization { seed, pack, grid, field })
}

/// Scalar results of one pore-scale solve.
#[derive(Debug, Clone, Serialize)]
pub struct FlowSummary {
    pub seed: u64,
    pub spheres: usize,
    pub dims: [usize; 3],
    pub cells_per_diameter: usize,
    pub pack_porosity: f64,
    pub porosity: f64,
    pub intrinsic_velocity: f64,
    pub superficial_velocity: f64,
    pub permeability: f64,
    pub blake_kozeny: f64,
    pub carman_kozeny: f64,
    pub reynolds: f64,
    pub inner: Option<pore::RegionStats>,
    pub inner_blake_kozeny: Option<f64>,
    pub iterations: usize,
    pub momentum_residual: f64,
    pub divergence: f64,
}

pub fn flow_summary(r: &Realization) -> Result<FlowSummary, CliError> {
    let d = r.pack.diameter;
    let eps = r.grid.porosity();
    let ui = pore::intrinsic_velocity(&r.field, &r.grid);
    let inner = match pore::region_statistics(&r.field, &r.grid, d, Region::Inner) {
        Ok(s) => Some(s),
        Err(PoreError::EmptyRegion) => None,
        Err(e) => return Err(e.into()),
    };
    let inner_bk = match inner {
        Some(s) if s.porosity > 0.0 && s.porosity < 1.0 => Some(pore::blake_kozeny(d, s.porosity)?),
        _ => None,
    };
    let (bk, ck) = if eps < 1.0 {
        (pore::blake_kozeny(d, eps)?, pore::carman_kozeny(d, eps)?)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(FlowSummary {
        seed: r.seed,
        spheres: r.pack.len(),
        dims: r.grid.dims,
        cells_per_diameter: r.grid.cells_per_diameter,
        pack_porosity: r.pack.porosity(),
        porosity: eps,
        intrinsic_velocity: ui,
        superficial_velocity: pore::superficial_velocity(&r.field),
        permeability: pore::permeability(&r.field)?,
        blake_kozeny: bk,
        carman_kozeny: ck,
        reynolds: ui * d * WATER_DENSITY / r.field.viscosity,
        inner,
        inner_blake_kozeny: inner_bk,
        iterations: r.field.iterations,
        momentum_residual: r.field.momentum_residual,
        divergence: r.field.divergence,
    })
}

fn pore_pack(p: &PorePackParams, seed: u64) -> Result<Artifacts, CliError> {
    let seeds = realization_seeds(&p.pack, p.realizations, seed);
    let packs = seeds.par_iter().map(|&s| build_pack(&p.pack, s)).collect::<Result<Vec<_>, _>>()?;
    let mut out = Artifacts::new();
    let mut table = String::from("realization,seed,spheres,porosity\n");
    for (r, (pack, s)) in packs.iter().zip(&seeds).enumerate() {
        let _ = writeln!(table, "{r},{s},{},{}", pack.len(), pack.porosity());
        out.add(format!("pack_{r:03}.json"), pore::pack_to_json(pack));
    }
    out.add("packs.csv", table);
    Ok(out)
}

fn pore_solve(p: &PoreSolveParams, seed: u64) -> Result<Artifacts, CliError> {
    let r = solve_realization(&p.pack, seed, p.cells_per_diameter, &p.stokes, p.memory_cap_bytes)?;
    let mut out = Artifacts::new();
    out.add("pack.json", pore::pack_to_json(&r.pack));
    out.add_json("summary.json", &flow_summary(&r)?);
    let mut hist = String::from("check,relative_residual\n");
    for (i, h) in r.field.history.iter().enumerate() {
        let _ = writeln!(hist, "{i},{h:e}");
    }
    out.add("residuals.csv", hist);
    if p.dump_field {
        let (bytes, sidecar) = pore::field_dump(&r.field);
        out.add("field.bin", bytes);
        out.add_json("field.json", &sidecar);
    }
    Ok(out)
}

/// Ensemble PDF summary for one region.
#[derive(Debug, Clone, Serialize)]
pub struct PdfSummary {
    pub region: Region,
    pub realizations: usize,
    pub samples: usize,
    pub skewness: f64,
    pub binned_skewness: f64,
    pub negative_mass: f64,
    pub negative_fraction: f64,
    pub out_of_range: f64,
    pub mode: f64,
    /// Mode divided by the intrinsic velocity (equal to the mode itself for
    /// normalized histograms).
    pub mode_over_intrinsic: f64,
    pub max_over_intrinsic: f64,
}

pub struct PdfRun {
    pub flows: Vec<FlowSummary>,
    pub ensembles: Vec<VelocityHistogram>,
    pub summaries: Vec<PdfSummary>,
}

/// Solves every realization and averages the per-region histograms.
pub fn pdf_run(p: &PorePdfParams, seed: u64) -> Result<PdfRun, CliError> {
    let seeds = realization_seeds(&p.pack, p.realizations, seed);
    let bins = if p.normalized { Bins::normalized() } else { Bins::raw() };
    let per: Vec<(FlowSummary, Vec<VelocityHistogram>)> = seeds
        .par_iter()
        .map(|&s| {
            let r = solve_realization(&p.pack, s, p.cells_per_diameter, &p.stokes, p.memory_cap_bytes)?;
            let hists = p
                .regions
                .iter()
                .map(|&reg| pore::velocity_pdf(&r.field, &r.grid, r.pack.diameter, reg, bins, p.normalized))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((flow_summary(&r)?, hists))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mean_ui = per.iter().map(|(f, _)| f.intrinsic_velocity).sum::<f64>() / per.len() as f64;
    let mut ensembles = Vec::new();
    let mut summaries = Vec::new();
    for (k, &region) in p.regions.iter().enumerate() {
        let hs: Vec<VelocityHistogram> = per.iter().map(|(_, h)| h[k].clone()).collect();
        let e = pore::ensemble_average(&hs)?;
        let scale = if p.normalized { 1.0 } else { 1.0 / mean_ui };
        summaries.push(PdfSummary {
            region,
            realizations: hs.len(),
            samples: e.samples,
            skewness: e.skewness,
            binned_skewness: e.binned_skewness(),
            negative_mass: e.negative_mass(),
            negative_fraction: e.negative_fraction,
            out_of_range: e.out_of_range,
            mode: e.mode(),
            mode_over_intrinsic: e.mode() * scale,
            max_over_intrinsic: e.max * scale,
        });
        ensembles.push(e);
    }
    Ok(PdfRun { flows: per.into_iter().map(|(f, _)| f).collect(), ensembles, summaries })
}

pub fn flows_csv(flows: &[FlowSummary]) -> String {
    let mut s = String::from(
        "seed,spheres,porosity,intrinsic_velocity,permeability,blake_kozeny,inner_porosity,inner_permeability,inner_blake_kozeny\n",
    );
    for f in flows {
        let (ie, ik) = f.inner.map(|i| (i.porosity, i.permeability)).unwrap_or((f64::NAN, f64::NAN));
        let _ = writeln!(
            s,
            "{},{},{},{:e},{:e},{:e},{},{:e},{:e}",
            f.seed,
            f.spheres,
            f.porosity,
            f.intrinsic_velocity,
            f.permeability,
            f.blake_kozeny,
            ie,
            ik,
            f.inner_blake_kozeny.unwrap_or(f64::NAN)
        );
    }
    s
}

pub fn region_name(r: Region) -> &'static str {
    match r {
        Region::Inner => "inner",
        Region::Total => "total",
    }
}

fn pore_pdf(p: &PorePdfParams, seed: u64) -> Result<Artifacts, CliError> {
    if p.regions.is_empty() {
        return Err(CliError::Config("at least one region is required".into()));
    }
    let run = pdf_run(p, seed)?;
    let mut out = Artifacts::new();
    for (e, s) in run.ensembles.iter().zip(&run.summaries) {
        out.add(format!("pdf_{}.csv", region_name(s.region)), e.to_csv());
    }
    out.add("realizations.csv", flows_csv(&run.flows));
    out.add_json("summary.json", &serde_json::json!({ "regions": run.summaries, "realizations": run.flows }));
    Ok(out)
}
