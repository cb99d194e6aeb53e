use serde::{Deserialize, Serialize};
use std::fmt::Write;

use super::{FemState, LpsWeights, PermeabilityField, Rect, StructuredQuadMesh};

/// Self-describing header written next to a state CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarcyHeader {
    pub nx: usize,
    pub ny: usize,
    pub domain: Rect,
    pub permeability: PermeabilityField,
    pub lps: LpsWeights,
    pub columns: Vec<String>,
}

impl DarcyHeader {
    pub fn new(mesh: &StructuredQuadMesh, perm: &PermeabilityField, lps: LpsWeights) -> Self {
        Self {
            nx: mesh.nx(),
            ny: mesh.ny(),
            domain: mesh.domain(),
            permeability: perm.clone(),
            lps,
            columns: ["vertex", "x", "y", "u_x", "u_y", "p"].map(String::from).to_vec(),
        }
    }
}

/// One row per vertex: `vertex,x,y,u_x,u_y,p`.
pub fn state_csv(mesh: &StructuredQuadMesh, state: &FemState) -> String {
    let mut out = String::from("vertex,x,y,u_x,u_y,p\n");
    for v in 0..mesh.num_vertices() {
        let (x, y) = mesh.vertex_coords(v);
        writeln!(out, "{v},{x},{y},{:e},{:e},{:e}", state.ux(v), state.uy(v), state.pressure[v]).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_one_row_per_vertex() {
        let mesh = StructuredQuadMesh::new(2, 2, Rect::unit()).unwrap();
        let csv = state_csv(&mesh, &FemState::zeros(9));
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[0], "vertex,x,y,u_x,u_y,p");
        assert!(lines[9].starts_with("8,1,1,"));
    }

    #[test]
    fn header_round_trips() {
        let mesh = StructuredQuadMesh::new(4, 4, Rect::unit()).unwrap();
        let perm = PermeabilityField::uniform_grid(Rect::unit(), 2, 2, vec![[1.0, 2.0]; 4]).unwrap();
        let h = DarcyHeader::new(&mesh, &perm, LpsWeights::default());
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(serde_json::from_str::<DarcyHeader>(&s).unwrap(), h);
    }
}
