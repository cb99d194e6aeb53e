use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::darcy::{LpsWeights, Rect};
use crate::ident::{IdentConfig, ObservationKind, DEFAULT_SEED};
use crate::pore::{RandomPackOptions, Region, StokesOptions, DEFAULT_MEMORY_CAP};

/// A complete, self-contained experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Output directory; the command line and the environment take over when
    /// this is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Root of every random draw in the run.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    DarcyForward(DarcyForwardParams),
    Ident(IdentConfig),
    PfemSweep(PfemSweepParams),
    PfemSolve(PfemSolveParams),
    PorePack(PorePackParams),
    PoreSolve(PoreSolveParams),
    PorePdf(PorePdfParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::DarcyForward(_) => "darcy-forward",
            Experiment::Ident(_) => "ident",
            Experiment::PfemSweep(_) => "pfem-sweep",
            Experiment::PfemSolve(_) => "pfem-solve",
            Experiment::PorePack(_) => "pore-pack",
            Experiment::PoreSolve(_) => "pore-solve",
            Experiment::PorePdf(_) => "pore-pdf",
        }
    }

    /// The default parameter block for `kind`.
    pub fn default_for(kind: &str) -> Option<Self> {
        Some(match kind {
            "darcy-forward" => Experiment::DarcyForward(DarcyForwardParams::default()),
            "ident" => Experiment::Ident(IdentConfig::new(ObservationKind::Identity)),
            "pfem-sweep" => Experiment::PfemSweep(PfemSweepParams::default()),
            "pfem-solve" => Experiment::PfemSolve(PfemSolveParams::default()),
            "pore-pack" => Experiment::PorePack(PorePackParams::default()),
            "pore-solve" => Experiment::PoreSolve(PoreSolveParams::default()),
            "pore-pdf" => Experiment::PorePdf(PorePdfParams::default()),
            _ => return None,
        })
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self { experiment, output: None, seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DarcySource {
    Zero,
    /// Source of the built-in manufactured solution; errors against it are
    /// reported.
    Manufactured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DarcyForwardParams {
    pub nx: usize,
    pub ny: usize,
    pub domain: Rect,
    /// Subdomain grid `[gx, gy]`, numbered row by row from the lower left.
    pub partition: [usize; 2],
    /// `(a, b)` per subdomain; all ones when absent.
    pub permeability: Option<Vec<[f64; 2]>>,
    pub source: DarcySource,
    pub lps: LpsWeights,
}

impl Default for DarcyForwardParams {
    fn default() -> Self {
        Self {
            nx: 32,
            ny: 32,
            domain: Rect::unit(),
            partition: [1, 1],
            permeability: None,
            source: DarcySource::Manufactured,
            lps: LpsWeights::default(),
        }
    }
}

/// Péclet sweep of the condensed p-FEM stencil.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PfemSweepParams {
    pub degrees: Vec<usize>,
    pub pe_min: f64,
    pub pe_max: f64,
    pub pe_points: usize,
    pub gamma_eff: f64,
    /// Odd degrees whose stability threshold is tabulated.
    pub threshold_degrees: Vec<usize>,
}

impl Default for PfemSweepParams {
    fn default() -> Self {
        Self {
            degrees: (1..=8).collect(),
            pe_min: 0.1,
            pe_max: 20.0,
            pe_points: 200,
            gamma_eff: 1.0,
            threshold_degrees: vec![3, 5, 7, 9, 11],
        }
    }
}

/// The 1D boundary-layer problem solved at several degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PfemSolveParams {
    pub velocity: f64,
    pub diffusivity: f64,
    pub elements: usize,
    pub degrees: Vec<usize>,
    pub samples: usize,
}

impl Default for PfemSolveParams {
    fn default() -> Self {
        Self { velocity: 2.0, diffusivity: 0.02, elements: 10, degrees: vec![1, 3, 5, 7], samples: 401 }
    }
}

/// How a sphere pack is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PackSpec {
    Hexagonal {
        diameter: f64,
    },
    ClosePacked {
        diameter: f64,
        #[serde(default = "one_rep")]
        reps: [usize; 3],
    },
    Random {
        diameter: f64,
        /// Box edges in units of the diameter.
        box_diameters: [f64; 3],
        #[serde(default)]
        options: RandomPackOptions,
    },
    File {
        path: PathBuf,
    },
}

fn one_rep() -> [usize; 3] {
    [1, 1, 1]
}

impl PackSpec {
    pub fn is_random(&self) -> bool {
        matches!(self, PackSpec::Random { .. })
    }
}

impl Default for PackSpec {
    fn default() -> Self {
        PackSpec::Random { diameter: 2e-3, box_diameters: [6.0; 3], options: RandomPackOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PorePackParams {
    pub pack: PackSpec,
    /// Random packs use seeds `seed, seed + 1, ...`.
    pub realizations: usize,
}

impl Default for PorePackParams {
    fn default() -> Self {
        Self { pack: PackSpec::default(), realizations: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoreSolveParams {
    pub pack: PackSpec,
    pub cells_per_diameter: usize,
    pub stokes: StokesOptions,
    pub memory_cap_bytes: u64,
    /// Also write the full velocity/pressure field as a binary dump.
    pub dump_field: bool,
}

impl Default for PoreSolveParams {
    fn default() -> Self {
        Self {
            pack: PackSpec::Hexagonal { diameter: 2e-3 },
            cells_per_diameter: 20,
            stokes: StokesOptions::default(),
            memory_cap_bytes: DEFAULT_MEMORY_CAP,
            dump_field: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PorePdfParams {
    pub pack: PackSpec,
    pub realizations: usize,
    pub cells_per_diameter: usize,
    pub stokes: StokesOptions,
    pub memory_cap_bytes: u64,
    /// Bin `u / U_i` instead of raw velocities.
    pub normalized: bool,
    pub regions: Vec<Region>,
}

impl Default for PorePdfParams {
    fn default() -> Self {
        Self {
            pack: PackSpec::default(),
            realizations: 5,
            cells_per_diameter: 10,
            stokes: StokesOptions::default(),
            memory_cap_bytes: DEFAULT_MEMORY_CAP,
            normalized: true,
            regions: vec![Region::Inner, Region::Total],
        }
    }
}
