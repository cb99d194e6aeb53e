//! Batch command-line driver.
//!
//! Every run resolves to one [`ExperimentConfig`], computes its artifacts in
//! memory and, only on success, writes them together with a `manifest.json`
//! holding SHA-256 hashes of every file. Failures print one JSON object to
//! stderr and exit with status 2 (configuration or I/O) or 3 (numerical).

mod artifacts;
mod config;
mod experiments;
mod repro;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use thiserror::Error;

pub use artifacts::{Artifacts, Manifest, ManifestEntry};
pub use config::{
    DarcyForwardParams, DarcySource, Experiment, ExperimentConfig, PackSpec, PfemSolveParams, PfemSweepParams,
    PorePackParams, PorePdfParams, PoreSolveParams,
};
pub use experiments::{run_experiment, FlowSummary, PdfSummary, WATER_DENSITY};
pub use repro::{reproduce, Reproduction, REPRO_IDS};

use crate::darcy::DarcyError;
use crate::ident::IdentError;
use crate::pfem::PfemError;
use crate::pore::PoreError;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "POROUSFLOW_OUT";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }

    /// The machine-readable report printed on failure.
    pub fn report(&self) -> Value {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.message(), "exit_code": self.exit_code() }
        })
    }
}

impl From<PoreError> for CliError {
    fn from(e: PoreError) -> Self {
        match e {
            PoreError::NotPercolating { .. } | PoreError::NotConverged { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<DarcyError> for CliError {
    fn from(e: DarcyError) -> Self {
        match e {
            DarcyError::NotConverged { .. } | DarcyError::Factorization(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<IdentError> for CliError {
    fn from(e: IdentError) -> Self {
        match e {
            IdentError::Darcy(d) => d.into(),
            IdentError::OuterCapExceeded { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<PfemError> for CliError {
    fn from(e: PfemError) -> Self {
        match e {
            PfemError::SingularInternalBlock { .. } | PfemError::SingularSystem | PfemError::RootNotBracketed(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "porousflow", version, about = "Porous-media flow and transport experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stabilized Darcy finite elements.
    Darcy {
        #[command(subcommand)]
        action: DarcyCommand,
    },
    /// Permeability identification.
    Ident {
        #[command(subcommand)]
        action: IdentCommand,
    },
    /// High-order 1D convection-diffusion.
    Pfem {
        #[command(subcommand)]
        action: PfemCommand,
    },
    /// Sphere packs and pore-scale Stokes flow.
    Pore {
        #[command(subcommand)]
        action: PoreCommand,
    },
    /// Run any experiment from a configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Regenerate the data behind one figure or table.
    Repro {
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum DarcyCommand {
    /// Forward solve on a structured mesh.
    Solve(RunArgs),
}

#[derive(Debug, Subcommand)]
enum IdentCommand {
    /// Synthetic identification run.
    Run(RunArgs),
}

#[derive(Debug, Subcommand)]
enum PfemCommand {
    /// Diffusivity and stability sweep over Péclet numbers.
    Sweep(RunArgs),
    /// Boundary-layer problem at several degrees.
    Solve(RunArgs),
}

#[derive(Debug, Subcommand)]
enum PoreCommand {
    /// Generate sphere packs.
    Pack(RunArgs),
    /// Solve Stokes flow through one pack.
    Solve(RunArgs),
    /// Ensemble velocity PDFs.
    Pdf(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON configuration; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Upper bound on worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Override a parameter, e.g. `--set nx=64` or `--set pack.diameter=1e-3`.
    /// The value is parsed as JSON and falls back to a string.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Print the resolved configuration and exit without running.
    #[arg(long)]
    print_config: bool,
}

/// Entry point used by the binary. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(Some(path)) => {
            println!("{}", path.display());
            0
        }
        Ok(None) => 0,
        Err(e) => {
            eprintln!("{}", e.report());
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<Option<PathBuf>, CliError> {
    let (kind, args) = match command {
        Command::Darcy { action: DarcyCommand::Solve(a) } => ("darcy-forward", a),
        Command::Ident { action: IdentCommand::Run(a) } => ("ident", a),
        Command::Pfem { action: PfemCommand::Sweep(a) } => ("pfem-sweep", a),
        Command::Pfem { action: PfemCommand::Solve(a) } => ("pfem-solve", a),
        Command::Pore { action: PoreCommand::Pack(a) } => ("pore-pack", a),
        Command::Pore { action: PoreCommand::Solve(a) } => ("pore-solve", a),
        Command::Pore { action: PoreCommand::Pdf(a) } => ("pore-pdf", a),
        Command::Run { config, common } => {
            let cfg = load_config(&config)?;
            return execute(cfg, &common);
        }
        Command::Repro { id, out, seed, threads } => {
            configure_threads(threads)?;
            let seed = seed.unwrap_or(crate::ident::DEFAULT_SEED);
            let r = reproduce(&id, seed)?;
            let dir = output_dir(out.as_deref(), None, &format!("repro-{id}"));
            let manifest = r.artifacts.manifest(&format!("repro-{id}"), seed, r.config);
            return write_artifacts(&r.artifacts, &dir, &manifest).map(Some);
        }
    };
    let cfg = match &args.config {
        Some(path) => {
            let cfg = load_config(path)?;
            if cfg.experiment.kind() != kind {
                return Err(CliError::Config(format!(
                    "{} holds a '{}' experiment but the subcommand runs '{kind}'",
                    path.display(),
                    cfg.experiment.kind()
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(Experiment::default_for(kind).expect("known kind")),
    };
    execute(cfg, &args.common)
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn execute(cfg: ExperimentConfig, common: &CommonArgs) -> Result<Option<PathBuf>, CliError> {
    let cfg = resolve(cfg, common)?;
    if common.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(None);
    }
    configure_threads(common.threads)?;
    let artifacts = run_experiment(&cfg)?;
    let kind = cfg.experiment.kind();
    let dir = output_dir(common.out.as_deref(), cfg.output.as_deref(), kind);
    let manifest = artifacts.manifest(kind, cfg.seed, config_for_manifest(&cfg));
    write_artifacts(&artifacts, &dir, &manifest).map(Some)
}

/// Applies `--seed` and `--set` overrides; flags take precedence over the
/// file.
fn resolve(cfg: ExperimentConfig, common: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut value = serde_json::to_value(&cfg).expect("config serializes");
    for item in &common.overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override '{item}' is not of the form PATH=VALUE")))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut value["experiment"]["params"], path, parsed)?;
    }
    if let Some(seed) = common.seed {
        value["seed"] = seed.into();
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}

fn set_path(root: &mut Value, path: &str, new: Value) -> Result<(), CliError> {
    let keys: Vec<&str> = path.split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields one item");
    let mut node = root;
    for key in parents.iter().copied().chain(std::iter::once(*last)) {
        if key.is_empty() {
            return Err(CliError::Config(format!("empty key in override path '{path}'")));
        }
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        node = match node {
            Value::Object(map) => map.entry(key.to_string()).or_insert(Value::Null),
            Value::Array(items) => {
                let len = items.len();
                key.parse::<usize>()
                    .ok()
                    .and_then(|i| items.get_mut(i))
                    .ok_or_else(|| CliError::Config(format!("'{key}' in '{path}' is not an index below {len}")))?
            }
            _ => return Err(CliError::Config(format!("'{path}' descends into a scalar"))),
        };
    }
    *node = new;
    Ok(())
}

/// The configuration recorded in the manifest; the output location is left
/// out so that reruns into different directories hash identically.
fn config_for_manifest(cfg: &ExperimentConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Value::Object(map) = &mut v {
        map.remove("output");
    }
    v
}

fn output_dir(flag: Option<&Path>, config: Option<&Path>, kind: &str) -> PathBuf {
    if let Some(p) = flag.or(config) {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(kind),
        _ => PathBuf::from("porousflow-out").join(kind),
    }
}

fn write_artifacts(artifacts: &Artifacts, dir: &Path, manifest: &Manifest) -> Result<PathBuf, CliError> {
    artifacts.write(dir, manifest).map_err(|e| CliError::Io(format!("writing to {}: {e}", dir.display())))
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    // The global pool can only be set once per process; a second request
    // keeps the first setting.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
