use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pack::SpherePack;
use super::PoreError;

/// Rough working-set size of the Stokes solve per grid cell, in bytes.
pub const BYTES_PER_CELL: u64 = 320;

/// Default memory cap for [`voxelize`]: 4 GiB.
pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;

/// Periodic Cartesian grid with a solid/fluid flag per cell.
///
/// Cell `(i, j, k)` has linear index `i + nx (j + ny k)` and its centre at
/// `((i + 1/2) hx, (j + 1/2) hy, (k + 1/2) hz)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub cells_per_diameter: usize,
    pub solid: Vec<bool>,
}

/// Number of cells along an edge of length `l` at roughly `cpd` cells per `d`.
pub fn cells_along(l: f64, d: f64, cpd: usize) -> usize {
    ((l / d * cpd as f64).round() as usize).max(1)
}

pub fn memory_estimate(dims: [usize; 3]) -> u64 {
    dims.iter().map(|&n| n as u64).product::<u64>() * BYTES_PER_CELL
}

/// Marks a cell solid iff its centre lies inside a (periodically wrapped)
/// sphere. Cells per axis are rounded so that each box edge is an integer
/// number of cells.
pub fn voxelize(pack: &SpherePack, cells_per_diameter: usize, memory_cap: u64) -> Result<VoxelGrid, PoreError> {
    if cells_per_diameter < 4 {
        return Err(PoreError::InvalidInput(format!(
            "resolution must be at least 4 cells per diameter, got {cells_per_diameter}"
        )));
    }
    let dims = [0, 1, 2].map(|k| cells_along(pack.domain[k], pack.diameter, cells_per_diameter));
    let estimate = memory_estimate(dims);
    if estimate > memory_cap {
        return Err(PoreError::MemoryCap { dims, estimate, cap: memory_cap });
    }
    let spacing = [0, 1, 2].map(|k| pack.domain[k] / dims[k] as f64);
    let [nx, ny, nz] = dims;
    let r = 0.5 * pack.diameter;
    let r2 = r * r;
    let mut solid = vec![false; nx * ny * nz];
    solid.par_chunks_mut(nx * ny).enumerate().for_each(|(k, slab)| {
        let z = (k as f64 + 0.5) * spacing[2];
        for c in &pack.centers {
            let mut dz = z - c[2];
            dz -= pack.domain[2] * (dz / pack.domain[2]).round();
            let rest = r2 - dz * dz;
            if rest < 0.0 {
                continue;
            }
            let ry = rest.sqrt();
            let j0 = ((c[1] - ry) / spacing[1] - 0.5).floor() as i64;
            let j1 = ((c[1] + ry) / spacing[1] - 0.5).ceil() as i64;
            for jj in j0..=j1 {
                let y = (jj as f64 + 0.5) * spacing[1];
                let dy = y - c[1];
                let rest_y = rest - dy * dy;
                if rest_y < 0.0 {
                    continue;
                }
                let j = jj.rem_euclid(ny as i64) as usize;
                let rx = rest_y.sqrt();
                let i0 = ((c[0] - rx) / spacing[0] - 0.5).floor() as i64;
                let i1 = ((c[0] + rx) / spacing[0] - 0.5).ceil() as i64;
                for ii in i0..=i1 {
                    let dx = (ii as f64 + 0.5) * spacing[0] - c[0];
                    if dx * dx + dy * dy + dz * dz < r2 {
                        let i = ii.rem_euclid(nx as i64) as usize;
                        slab[i + nx * j] = true;
                    }
                }
            }
        }
    });
    Ok(VoxelGrid { dims, spacing, cells_per_diameter, solid })
}

impl VoxelGrid {
    /// All-fluid grid.
    pub fn open(dims: [usize; 3], spacing: [f64; 3]) -> Self {
        Self { dims, spacing, cells_per_diameter: 0, solid: vec![false; dims.iter().product()] }
    }

    pub fn len(&self) -> usize {
        self.solid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solid.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn coords(&self, c: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [c % nx, (c / nx) % ny, c / (nx * ny)]
    }

    /// Linear index of the periodic neighbour of `c` one step along `axis`.
    pub fn neighbour(&self, c: usize, axis: usize, forward: bool) -> usize {
        let mut ijk = self.coords(c);
        let n = self.dims[axis];
        ijk[axis] = if forward { (ijk[axis] + 1) % n } else { (ijk[axis] + n - 1) % n };
        self.index(ijk[0], ijk[1], ijk[2])
    }

    pub fn fluid_cells(&self) -> usize {
        self.solid.iter().filter(|s| !**s).count()
    }

    pub fn porosity(&self) -> f64 {
        self.fluid_cells() as f64 / self.len() as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn extent(&self) -> [f64; 3] {
        [0, 1, 2].map(|k| self.spacing[k] * self.dims[k] as f64)
    }

    /// Reflects the geometry in x: cell `i` maps to `nx - 1 - i`.
    pub fn mirror_x(&self) -> Self {
        let mut out = self.clone();
        let nx = self.dims[0];
        for (c, s) in out.solid.iter_mut().enumerate() {
            let [i, j, k] = self.coords(c);
            *s = self.solid[self.index(nx - 1 - i, j, k)];
        }
        out
    }

    /// Fluid cells belonging to a component that connects to its own periodic
    /// image along x, so that a body force in x can drive a net flow through
    /// it. Fluid in all other components stays at rest.
    pub fn percolating_along_x(&self) -> Vec<bool> {
        const UNSEEN: u32 = u32::MAX;
        let n = self.len();
        let mut comp = vec![UNSEEN; n];
        let mut wrap = vec![0i32; n];
        let mut active = vec![false; n];
        let mut queue = VecDeque::new();
        let mut members = Vec::new();
        let mut next = 0u32;
        for seed in 0..n {
            if self.solid[seed] || comp[seed] != UNSEEN {
                continue;
            }
            comp[seed] = next;
            wrap[seed] = 0;
            queue.push_back(seed);
            members.clear();
            let mut wraps = false;
            while let Some(c) = queue.pop_front() {
                members.push(c);
                let [i, _, _] = self.coords(c);
                for axis in 0..3 {
                    for forward in [true, false] {
                        let nb = self.neighbour(c, axis, forward);
                        if self.solid[nb] {
                            continue;
                        }
                        let mut w = wrap[c];
                        if axis == 0 {
                            if forward && i + 1 == self.dims[0] {
                                w += 1;
                            } else if !forward && i == 0 {
                                w -= 1;
                            }
                        }
                        if comp[nb] == UNSEEN {
                            comp[nb] = next;
                            wrap[nb] = w;
                            queue.push_back(nb);
                        } else if wrap[nb] != w {
                            wraps = true;
                        }
                    }
                }
            }
            if wraps {
                for &c in &members {
                    active[c] = true;
                }
            }
            next += 1;
        }
        active
    }
}
