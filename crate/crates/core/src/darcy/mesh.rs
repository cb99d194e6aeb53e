use serde::{Deserialize, Serialize};

use super::DarcyError;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains_rect(&self, other: &Rect, tol: f64) -> bool {
        other.x0 >= self.x0 - tol && other.x1 <= self.x1 + tol && other.y0 >= self.y0 - tol && other.y1 <= self.y1 + tol
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Uniform `nx × ny` quadrilateral mesh with its 2×2 patch structure.
///
/// Vertex `(i, j)` has index `j (nx + 1) + i`; cell `(i, j)` has index
/// `j nx + i`; patch `(I, J)` covers cells `2I..2I+2 × 2J..2J+2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredQuadMesh {
    nx: usize,
    ny: usize,
    domain: Rect,
    hx: f64,
    hy: f64,
    patch_of: Vec<usize>,
    patch_diameter: Vec<f64>,
}

impl StructuredQuadMesh {
    pub fn new(nx: usize, ny: usize, domain: Rect) -> Result<Self, DarcyError> {
        if nx < 2 || ny < 2 || nx % 2 == 1 || ny % 2 == 1 {
            return Err(DarcyError::PatchStructure { nx, ny });
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(DarcyError::DegenerateDomain);
        }
        let hx = domain.width() / nx as f64;
        let hy = domain.height() / ny as f64;
        let px = nx / 2;
        let patch_of = (0..nx * ny).map(|c| (c / nx / 2) * px + (c % nx) / 2).collect();
        let diam = ((2.0 * hx).powi(2) + (2.0 * hy).powi(2)).sqrt();
        let patch_diameter = vec![diam; px * (ny / 2)];
        Ok(Self { nx, ny, domain, hx, hy, patch_of, patch_diameter })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn num_vertices(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn num_patches(&self) -> usize {
        self.patch_diameter.len()
    }

    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn vertex_coords(&self, v: usize) -> (f64, f64) {
        let i = v % (self.nx + 1);
        let j = v / (self.nx + 1);
        (self.domain.x0 + i as f64 * self.hx, self.domain.y0 + j as f64 * self.hy)
    }

    /// Counter-clockwise from the lower-left corner.
    pub fn cell_vertices(&self, cell: usize) -> [usize; 4] {
        let i = cell % self.nx;
        let j = cell / self.nx;
        [
            self.vertex_index(i, j),
            self.vertex_index(i + 1, j),
            self.vertex_index(i + 1, j + 1),
            self.vertex_index(i, j + 1),
        ]
    }

    pub fn cell_rect(&self, cell: usize) -> Rect {
        let i = (cell % self.nx) as f64;
        let j = (cell / self.nx) as f64;
        let x0 = self.domain.x0 + i * self.hx;
        let y0 = self.domain.y0 + j * self.hy;
        Rect::new(x0, y0, x0 + self.hx, y0 + self.hy)
    }

    /// Cell containing `(x, y)`, clamped to the mesh.
    pub fn locate(&self, x: f64, y: f64) -> usize {
        let i = (((x - self.domain.x0) / self.hx).floor() as isize).clamp(0, self.nx as isize - 1);
        let j = (((y - self.domain.y0) / self.hy).floor() as isize).clamp(0, self.ny as isize - 1);
        j as usize * self.nx + i as usize
    }

    pub fn patch_of(&self, cell: usize) -> usize {
        self.patch_of[cell]
    }

    pub fn patch_diameter(&self, patch: usize) -> f64 {
        self.patch_diameter[patch]
    }

    /// The four fine cells of a patch, lower-left first, row by row.
    pub fn patch_cells(&self, patch: usize) -> [usize; 4] {
        let px = self.nx / 2;
        let ci = 2 * (patch % px);
        let cj = 2 * (patch / px);
        [cj * self.nx + ci, cj * self.nx + ci + 1, (cj + 1) * self.nx + ci, (cj + 1) * self.nx + ci + 1]
    }
}
