use serde::{Deserialize, Serialize};

use super::pack::SpherePack;
use super::stokes::StokesField;
use super::PoreError;

pub fn pack_to_json(pack: &SpherePack) -> String {
    serde_json::to_string_pretty(pack).expect("pack serializes")
}

pub fn pack_from_json(text: &str) -> Result<SpherePack, PoreError> {
    let raw: SpherePack = serde_json::from_str(text).map_err(|e| PoreError::InvalidInput(e.to_string()))?;
    let seed = raw.seed;
    let mut pack = SpherePack::new(raw.domain, raw.diameter, raw.centers)?;
    pack.seed = seed;
    if !pack.overlaps().is_empty() {
        return Err(PoreError::InvalidInput("pack contains overlapping spheres".into()));
    }
    Ok(pack)
}

/// Layout description written next to a binary field dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSidecar {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub dtype: String,
    pub endianness: String,
    pub index_order: String,
    pub components: Vec<ComponentLayout>,
    pub viscosity: f64,
    pub forcing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentLayout {
    pub name: String,
    pub offset_bytes: usize,
    pub location: String,
}

/// Flat little-endian f64 dump of `u`, `v`, `w` and `p`, one block each, plus
/// its JSON sidecar.
pub fn field_dump(field: &StokesField) -> (Vec<u8>, FieldSidecar) {
    let n = field.num_cells();
    let mut bytes = Vec::with_capacity(32 * n);
    for v in field.velocity.iter().chain(&field.pressure) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let face = |name: &str, k: usize, axis: &str| ComponentLayout {
        name: name.into(),
        offset_bytes: 8 * n * k,
        location: format!("lower {axis} face of each cell"),
    };
    let sidecar = FieldSidecar {
        dims: field.dims,
        spacing: field.spacing,
        dtype: "f64".into(),
        endianness: "little".into(),
        index_order: "i + nx * (j + ny * k)".into(),
        components: vec![
            face("u", 0, "x"),
            face("v", 1, "y"),
            face("w", 2, "z"),
            ComponentLayout { name: "p".into(), offset_bytes: 24 * n, location: "cell centre".into() },
        ],
        viscosity: field.viscosity,
        forcing: field.forcing,
    };
    (bytes, sidecar)
}
