use serde::{Deserialize, Serialize};

use super::{DarcyError, Rect, StructuredQuadMesh};

/// Piecewise-constant diagonal inverse permeability `diag(a_i, b_i)` on a
/// partition of the domain into axis-aligned rectangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermeabilityField {
    partition: Vec<Rect>,
    entries: Vec<[f64; 2]>,
}

impl PermeabilityField {
    pub fn new(partition: Vec<Rect>, entries: Vec<[f64; 2]>) -> Result<Self, DarcyError> {
        if partition.len() != entries.len() {
            return Err(DarcyError::PartitionMismatch(format!(
                "{} subdomains but {} entries",
                partition.len(),
                entries.len()
            )));
        }
        if partition.is_empty() {
            return Err(DarcyError::PartitionMismatch("empty partition".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            for &v in e {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(DarcyError::NonPositivePermeability { subdomain: i, value: v });
                }
            }
        }
        Ok(Self { partition, entries })
    }

    /// `gx × gy` equally sized rectangles, numbered row by row from the
    /// lower-left corner.
    pub fn grid_partition(domain: Rect, gx: usize, gy: usize) -> Vec<Rect> {
        let dx = domain.width() / gx as f64;
        let dy = domain.height() / gy as f64;
        let mut out = Vec::with_capacity(gx * gy);
        for j in 0..gy {
            for i in 0..gx {
                let x0 = domain.x0 + i as f64 * dx;
                let y0 = domain.y0 + j as f64 * dy;
                let x1 = if i + 1 == gx { domain.x1 } else { x0 + dx };
                let y1 = if j + 1 == gy { domain.y1 } else { y0 + dy };
                out.push(Rect::new(x0, y0, x1, y1));
            }
        }
        out
    }

    pub fn uniform_grid(domain: Rect, gx: usize, gy: usize, entries: Vec<[f64; 2]>) -> Result<Self, DarcyError> {
        Self::new(Self::grid_partition(domain, gx, gy), entries)
    }

    pub fn constant(domain: Rect, a: f64, b: f64) -> Result<Self, DarcyError> {
        Self::new(vec![domain], vec![[a, b]])
    }

    pub fn partition(&self) -> &[Rect] {
        &self.partition
    }

    pub fn entries(&self) -> &[[f64; 2]] {
        &self.entries
    }

    pub fn num_subdomains(&self) -> usize {
        self.partition.len()
    }

    /// Entries flattened as `(a_0, b_0, a_1, b_1, ...)`.
    pub fn flat_entries(&self) -> Vec<f64> {
        self.entries.iter().flat_map(|e| e.iter().copied()).collect()
    }

    /// Subdomain index of every mesh cell. Fails if the subdomains do not
    /// tile the mesh domain or a cell straddles two subdomains.
    pub fn cell_subdomains(&self, mesh: &StructuredQuadMesh) -> Result<Vec<usize>, DarcyError> {
        let domain = mesh.domain();
        let (hx, hy) = mesh.spacing();
        let tol = 1e-9 * (hx.min(hy));
        let area: f64 = self.partition.iter().map(Rect::area).sum();
        if (area - domain.area()).abs() > 1e-9 * domain.area() {
            return Err(DarcyError::PartitionMismatch(format!(
                "subdomain areas sum to {area} but the domain area is {}",
                domain.area()
            )));
        }
        for (i, r) in self.partition.iter().enumerate() {
            if !domain.contains_rect(r, tol) {
                return Err(DarcyError::PartitionMismatch(format!("subdomain {i} extends outside the domain")));
            }
            for (j, s) in self.partition.iter().enumerate().skip(i + 1) {
                let ox = r.x1.min(s.x1) - r.x0.max(s.x0);
                let oy = r.y1.min(s.y1) - r.y0.max(s.y0);
                if ox > tol && oy > tol {
                    return Err(DarcyError::PartitionMismatch(format!("subdomains {i} and {j} overlap")));
                }
            }
        }
        (0..mesh.num_cells())
            .map(|c| {
                let cell = mesh.cell_rect(c);
                self.partition.iter().position(|r| r.contains_rect(&cell, tol)).ok_or_else(|| {
                    DarcyError::PartitionMismatch(format!("cell {c} is not contained in a single subdomain"))
                })
            })
            .collect()
    }
}
