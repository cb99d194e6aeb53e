use serde::{Deserialize, Serialize};

use crate::darcy::{DofMap, StructuredQuadMesh};

use super::IdentError;

/// Scalar read off the finite element state at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Ux,
    Uy,
    P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementPoint {
    pub x: f64,
    pub y: f64,
    pub quantities: Vec<Quantity>,
}

/// Linear observation operator `C` acting on the (gauge-fixed) state vector.
///
/// Rows are stored sparsely; the identity operator keeps no rows at all.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationOperator {
    n: usize,
    rows: Option<Vec<Vec<(usize, f64)>>>,
}

impl ObservationOperator {
    pub fn identity(dofs: DofMap) -> Self {
        Self { n: dofs.len(), rows: None }
    }

    pub fn point_set(mesh: &StructuredQuadMesh, points: &[MeasurementPoint]) -> Result<Self, IdentError> {
        let dofs = DofMap { num_vertices: mesh.num_vertices() };
        let domain = mesh.domain();
        let (hx, hy) = mesh.spacing();
        let mut rows = Vec::new();
        for pt in points {
            if !domain.contains_point(pt.x, pt.y) {
                return Err(IdentError::PointOutsideDomain { x: pt.x, y: pt.y });
            }
            let cell = mesh.locate(pt.x, pt.y);
            let r = mesh.cell_rect(cell);
            let s = (pt.x - r.x0) / hx;
            let t = (pt.y - r.y0) / hy;
            let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
            let vs = mesh.cell_vertices(cell);
            for q in &pt.quantities {
                let idx = |v: usize| match q {
                    Quantity::Ux => dofs.ux(v),
                    Quantity::Uy => dofs.uy(v),
                    Quantity::P => dofs.p(v),
                };
                rows.push((0..4).filter(|&a| w[a] != 0.0).map(|a| (idx(vs[a]), w[a])).collect());
            }
        }
        if rows.is_empty() {
            return Err(IdentError::InvalidInput("point set observes nothing".into()));
        }
        Ok(Self { n: dofs.len(), rows: Some(rows) })
    }

    /// `nx_pts × ny_pts` points at cell-centred lattice positions, each
    /// measuring `u_x`, `u_y` and `p`.
    pub fn lattice_points(mesh: &StructuredQuadMesh, nx_pts: usize, ny_pts: usize) -> Vec<MeasurementPoint> {
        let d = mesh.domain();
        let mut out = Vec::with_capacity(nx_pts * ny_pts);
        for j in 0..ny_pts {
            for i in 0..nx_pts {
                out.push(MeasurementPoint {
                    x: d.x0 + d.width() * (i as f64 + 0.5) / nx_pts as f64,
                    y: d.y0 + d.height() * (j as f64 + 0.5) / ny_pts as f64,
                    quantities: vec![Quantity::Ux, Quantity::Uy, Quantity::P],
                });
            }
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.rows.is_none()
    }

    pub fn input_dim(&self) -> usize {
        self.n
    }

    pub fn output_dim(&self) -> usize {
        self.rows.as_ref().map_or(self.n, Vec::len)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.rows {
            None => x.to_vec(),
            Some(rows) => rows.iter().map(|r| r.iter().map(|&(i, w)| w * x[i]).sum()).collect(),
        }
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        match &self.rows {
            None => y.to_vec(),
            Some(rows) => {
                let mut out = vec![0.0; self.n];
                for (r, &v) in rows.iter().zip(y) {
                    for &(i, w) in r {
                        out[i] += w * v;
                    }
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darcy::{FemState, Rect};

    #[test]
    fn point_rows_reproduce_fe_evaluation() {
        let mesh = StructuredQuadMesh::new(8, 4, Rect::unit()).unwrap();
        let state = FemState::interpolate(&mesh, |x, y| ([x * y, x - y], (3.0 * x).sin() + y));
        let pts = ObservationOperator::lattice_points(&mesh, 8, 4);
        let c = ObservationOperator::point_set(&mesh, &pts).unwrap();
        assert_eq!(c.output_dim(), 96);
        let y = c.apply(&state.to_vector());
        for (k, p) in pts.iter().enumerate() {
            let e = state.eval(&mesh, p.x, p.y);
            for m in 0..3 {
                assert!((y[3 * k + m] - e[m]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let mesh = StructuredQuadMesh::new(4, 4, Rect::unit()).unwrap();
        let c = ObservationOperator::point_set(&mesh, &ObservationOperator::lattice_points(&mesh, 3, 2)).unwrap();
        let x: Vec<f64> = (0..c.input_dim()).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = (0..c.output_dim()).map(|i| (i as f64).cos()).collect();
        let lhs: f64 = c.apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = c.apply_transpose(&y).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn outside_points_are_rejected() {
        let mesh = StructuredQuadMesh::new(2, 2, Rect::unit()).unwrap();
        let p = MeasurementPoint { x: 1.5, y: 0.5, quantities: vec![Quantity::P] };
        assert!(matches!(ObservationOperator::point_set(&mesh, &[p]), Err(IdentError::PointOutsideDomain { .. })));
    }

    #[test]
    fn identity_dimension() {
        let mesh = StructuredQuadMesh::new(64, 64, Rect::unit()).unwrap();
        let c = ObservationOperator::identity(DofMap { num_vertices: mesh.num_vertices() });
        assert_eq!(c.output_dim(), 3 * 65 * 65);
    }
}
