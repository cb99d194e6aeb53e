use std::fmt::Write;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::artifacts::Artifacts;
use super::config::*;
use super::experiments::{flow_summary, flows_csv, pdf_run, region_name, run_experiment, solve_realization};
use super::CliError;
use crate::ident::{IdentConfig, ObservationKind};
use crate::pfem;
use crate::pore::{Region, StokesOptions, DEFAULT_MEMORY_CAP};

pub const REPRO_IDS: [&str; 8] = ["fig7", "fig8", "fig9", "fig10", "fig11", "fig3b", "fig4", "tab1-analog"];

/// Relative errors reported for the two observation operators in the
/// original identification study; they serve as order-of-magnitude anchors.
const TABLE1_ANCHORS: [(&str, [f64; 2]); 2] = [("identity", [0.0655, 0.00565]), ("points", [0.181, 0.0634])];

/// Output of one canonical reproduction: the configuration that was run and
/// the resulting tables.
pub struct Reproduction {
    pub config: serde_json::Value,
    pub artifacts: Artifacts,
}

pub fn reproduce(id: &str, seed: u64) -> Result<Reproduction, CliError> {
    match id {
        "fig7" | "fig8" => {
            let cfg = ExperimentConfig::new(Experiment::PfemSweep(PfemSweepParams::default()));
            let artifacts = run_experiment(&cfg)?;
            Ok(Reproduction { config: serde_json::to_value(&cfg).expect("config serializes"), artifacts })
        }
        "fig9" => profiles(2.0, 0.005, 10, &[1, 2, 3, 4]),
        "fig10" => fig10(),
        "fig11" => profiles(2.0, 0.02, 10, &[1, 3, 5, 7]),
        "fig3b" => fig3b(seed),
        "fig4" => fig4(seed),
        "tab1-analog" => tab1(seed),
        other => Err(CliError::Config(format!("unknown figure id '{other}'; available: {}", REPRO_IDS.join(", ")))),
    }
}

fn profiles(velocity: f64, diffusivity: f64, elements: usize, degrees: &[usize]) -> Result<Reproduction, CliError> {
    let cfg = ExperimentConfig::new(Experiment::PfemSolve(PfemSolveParams {
        velocity,
        diffusivity,
        elements,
        degrees: degrees.to_vec(),
        samples: 401,
    }));
    let artifacts = run_experiment(&cfg)?;
    Ok(Reproduction { config: serde_json::to_value(&cfg).expect("config serializes"), artifacts })
}

fn fig10() -> Result<Reproduction, CliError> {
    let pes = pfem::tables::linspace(0.1, 8.0, 80);
    let mut artifacts = Artifacts::new();
    artifacts.add("min_degree.csv", pfem::tables::min_degree_csv(&pes)?);
    let mut thresholds = String::from("p,max_stable_pe\n");
    for p in (3..=15).step_by(2) {
        let _ = writeln!(thresholds, "{p},{:.9}", pfem::max_stable_pe(p)?);
    }
    artifacts.add("thresholds.csv", thresholds);
    Ok(Reproduction {
        config: json!({ "pe_min": 0.1, "pe_max": 8.0, "pe_points": 80, "odd_degrees": [3, 15] }),
        artifacts,
    })
}

const PORE_DIAMETER: f64 = 2e-3;

fn random_spec(box_d: f64) -> PackSpec {
    PackSpec::Random { diameter: PORE_DIAMETER, box_diameters: [box_d; 3], options: Default::default() }
}

fn fig3b(seed: u64) -> Result<Reproduction, CliError> {
    const SIZES: [f64; 3] = [4.0, 5.0, 6.0];
    const SEEDS: u64 = 3;
    const CPD: usize = 10;
    let jobs: Vec<(f64, u64)> = SIZES.iter().flat_map(|&l| (0..SEEDS).map(move |r| (l, seed + r))).collect();
    let flows = jobs
        .par_iter()
        .map(|&(l, s)| {
            let r = solve_realization(&random_spec(l), s, CPD, &StokesOptions::default(), DEFAULT_MEMORY_CAP)?;
            flow_summary(&r)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    #[derive(Serialize)]
    struct Row {
        box_diameters: f64,
        realizations: usize,
        porosity: f64,
        permeability: f64,
        blake_kozeny: f64,
        carman_kozeny: f64,
        inner_porosity: f64,
        inner_permeability: f64,
        inner_blake_kozeny: f64,
    }
    let mut table = String::from(
        "box_diameters,realizations,porosity,permeability,blake_kozeny,carman_kozeny,inner_porosity,inner_permeability,inner_blake_kozeny\n",
    );
    let mut rows = Vec::new();
    for &l in &SIZES {
        let group: Vec<_> = jobs.iter().zip(&flows).filter(|((bl, _), _)| *bl == l).map(|(_, f)| f).collect();
        let n = group.len() as f64;
        let mean = |f: &dyn Fn(&super::experiments::FlowSummary) -> f64| group.iter().map(|g| f(g)).sum::<f64>() / n;
        let eps = mean(&|g| g.porosity);
        let inner = group.iter().filter_map(|g| g.inner).collect::<Vec<_>>();
        let m = inner.len().max(1) as f64;
        let inner_eps = inner.iter().map(|s| s.porosity).sum::<f64>() / m;
        let row = Row {
            box_diameters: l,
            realizations: group.len(),
            porosity: eps,
            permeability: mean(&|g| g.permeability),
            blake_kozeny: crate::pore::blake_kozeny(PORE_DIAMETER, eps)?,
            carman_kozeny: crate::pore::carman_kozeny(PORE_DIAMETER, eps)?,
            inner_porosity: inner_eps,
            inner_permeability: inner.iter().map(|s| s.permeability).sum::<f64>() / m,
            inner_blake_kozeny: if inner.is_empty() {
                f64::NAN
            } else {
                crate::pore::blake_kozeny(PORE_DIAMETER, inner_eps)?
            },
        };
        let _ = writeln!(
            table,
            "{},{},{},{:e},{:e},{:e},{},{:e},{:e}",
            row.box_diameters,
            row.realizations,
            row.porosity,
            row.permeability,
            row.blake_kozeny,
            row.carman_kozeny,
            row.inner_porosity,
            row.inner_permeability,
            row.inner_blake_kozeny
        );
        rows.push(row);
    }
    let mut artifacts = Artifacts::new();
    artifacts.add("permeability.csv", table);
    artifacts.add("realizations.csv", flows_csv(&flows));
    artifacts.add_json("summary.json", &rows);
    Ok(Reproduction {
        config: json!({
            "diameter": PORE_DIAMETER,
            "box_diameters": SIZES,
            "realizations": SEEDS,
            "cells_per_diameter": CPD,
            "stokes": StokesOptions::default(),
        }),
        artifacts,
    })
}

fn fig4(seed: u64) -> Result<Reproduction, CliError> {
    const SIZES: [f64; 2] = [4.0, 6.0];
    let mut artifacts = Artifacts::new();
    let mut runs = Vec::new();
    let mut summaries = Vec::new();
    for &l in &SIZES {
        let params = PorePdfParams { pack: random_spec(l), ..PorePdfParams::default() };
        let run = pdf_run(&params, seed)?;
        for (e, s) in run.ensembles.iter().zip(&run.summaries) {
            artifacts.add(format!("pdf_{}d_{}.csv", l as usize, region_name(s.region)), e.to_csv());
        }
        artifacts.add(format!("realizations_{}d.csv", l as usize), flows_csv(&run.flows));
        summaries.push(json!({ "box_diameters": l, "regions": run.summaries }));
        runs.push(run);
    }
    let mut distances = String::from("region,l1_distance_4d_6d\n");
    for (k, region) in [Region::Inner, Region::Total].into_iter().enumerate() {
        let d = runs[0].ensembles[k].l1_distance(&runs[1].ensembles[k])?;
        let _ = writeln!(distances, "{},{d:e}", region_name(region));
    }
    artifacts.add("l1_distance.csv", distances);
    artifacts.add_json("summary.json", &summaries);
    Ok(Reproduction { config: json!({ "box_diameters": SIZES, "params": PorePdfParams::default() }), artifacts })
}

fn tab1(seed: u64) -> Result<Reproduction, CliError> {
    let kinds = [ObservationKind::Identity, ObservationKind::Points];
    let reports = kinds
        .iter()
        .map(|&kind| IdentConfig { seed, ..IdentConfig::new(kind) }.run().map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table =
        String::from("observation,observation_dim,error_a,error_b,anchor_error_a,anchor_error_b,outer_iterations\n");
    for ((name, anchor), r) in TABLE1_ANCHORS.iter().zip(&reports) {
        let _ = writeln!(
            table,
            "{name},{},{:e},{:e},{},{},{}",
            r.observation_dim,
            r.relative_errors[0],
            r.relative_errors[1],
            anchor[0],
            anchor[1],
            r.diagnostics.outer_iterations
        );
    }
    let mut artifacts = Artifacts::new();
    artifacts.add("table1.csv", table);
    artifacts.add_json("reports.json", &reports);
    artifacts.add(
        "NOTE.txt",
        "The anchor columns are the errors reported by the original study. Its reference parameters \
         were never published, so the computed errors use the shipped default reference (seeded \
         log-uniform in [1, 10]) and noiseless data. Only the ordering and order of magnitude are \
         comparable.\n",
    );
    let configs: Vec<IdentConfig> = kinds.iter().map(|&kind| IdentConfig { seed, ..IdentConfig::new(kind) }).collect();
    Ok(Reproduction { config: serde_json::to_value(&configs).expect("config serializes"), artifacts })
}
