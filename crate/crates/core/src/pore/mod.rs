//! Pore-scale flow through periodic sphere packs.
//!
//! A [`SpherePack`] is voxelized onto a periodic Cartesian grid, steady
//! Stokes flow driven by a constant pressure gradient is solved on the
//! staggered (MAC) grid, and the result is reduced to intrinsic velocity,
//! permeability and velocity histograms.

mod io;
mod pack;
mod stats;
mod stokes;
mod voxel;

pub use io::{field_dump, pack_from_json, pack_to_json, ComponentLayout, FieldSidecar};
pub use pack::{close_packed_pack, hexagonal_pack, random_pack, RandomPackOptions, SpherePack};
pub use stats::{
    blake_kozeny, carman_kozeny, ensemble_average, histogram, intrinsic_velocity, kozeny, permeability,
    region_statistics, superficial_velocity, velocity_pdf, Bins, Region, RegionStats, VelocityHistogram,
};
pub use stokes::{duct_mean_velocity, solve_stokes, StokesField, StokesOptions};
pub use voxel::{cells_along, memory_estimate, voxelize, VoxelGrid, BYTES_PER_CELL, DEFAULT_MEMORY_CAP};

#[derive(Debug, thiserror::Error)]
pub enum PoreError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("box {domain:?} is smaller than 4 diameters ({diameter}) along some axis")]
    BoxTooSmall { domain: [f64; 3], diameter: f64 },
    #[error("grid {dims:?} needs about {estimate} bytes, above the cap of {cap}")]
    MemoryCap { dims: [usize; 3], estimate: u64, cap: u64 },
    #[error("fluid does not percolate along {axis}")]
    NotPercolating { axis: char },
    #[error(
        "Stokes solve stopped after {iterations} iterations \
         (momentum residual {momentum:e}, divergence {divergence:e})"
    )]
    NotConverged { iterations: usize, momentum: f64, divergence: f64, history: Vec<f64> },
    #[error("histogram region contains no fluid cells")]
    EmptyRegion,
    #[error("histograms have different bins")]
    BinMismatch,
}
