use serde::{Deserialize, Serialize};

use super::stokes::StokesField;
use super::voxel::VoxelGrid;
use super::PoreError;

/// Mean cell-centred streamwise velocity over fluid cells.
pub fn intrinsic_velocity(field: &StokesField, grid: &VoxelGrid) -> f64 {
    let u = field.cell_centred_x();
    let (s, n) = u.iter().zip(&grid.solid).filter(|(_, s)| !**s).fold((0.0, 0usize), |(a, c), (v, _)| (a + v, c + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Streamwise velocity averaged over the whole box, solid included.
pub fn superficial_velocity(field: &StokesField) -> f64 {
    let u = field.component(0);
    u.iter().sum::<f64>() / u.len() as f64
}

/// `k = μ ⟨u⟩ / G` in m².
pub fn permeability(field: &StokesField) -> Result<f64, PoreError> {
    if field.forcing == 0.0 {
        return Err(PoreError::InvalidInput("permeability needs a nonzero forcing".into()));
    }
    Ok(field.viscosity * superficial_velocity(field) / field.forcing)
}

/// `K = D² ε³ / (α (1 - ε)²)`; α = 150 gives Blake-Kozeny, α = 180 Carman-Kozeny.
pub fn kozeny(diameter: f64, porosity: f64, alpha: f64) -> Result<f64, PoreError> {
    if !(porosity > 0.0 && porosity < 1.0) {
        return Err(PoreError::InvalidInput(format!("porosity {porosity} outside (0, 1)")));
    }
    if !(diameter > 0.0 && alpha > 0.0) {
        return Err(PoreError::InvalidInput("diameter and alpha must be positive".into()));
    }
    Ok(diameter * diameter * porosity.powi(3) / (alpha * (1.0 - porosity).powi(2)))
}

pub fn blake_kozeny(diameter: f64, porosity: f64) -> Result<f64, PoreError> {
    kozeny(diameter, porosity, 150.0)
}

pub fn carman_kozeny(diameter: f64, porosity: f64) -> Result<f64, PoreError> {
    kozeny(diameter, porosity, 180.0)
}

/// Which fluid cells contribute to a histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Total,
    /// Cells farther than `1.5 D` from every face of the box.
    Inner,
}

/// Porosity and velocity averages over one region of the box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub cells: usize,
    pub porosity: f64,
    pub superficial_velocity: f64,
    pub intrinsic_velocity: f64,
    /// `μ ⟨u⟩ / G` with the superficial velocity of this region.
    pub permeability: f64,
}

fn in_region(grid: &VoxelGrid, c: usize, diameter: f64, region: Region) -> bool {
    match region {
        Region::Total => true,
        Region::Inner => {
            let ext = grid.extent();
            let margin = 1.5 * diameter;
            let ijk = grid.coords(c);
            (0..3).all(|d| {
                let x = (ijk[d] as f64 + 0.5) * grid.spacing[d];
                x > margin && ext[d] - x > margin
            })
        }
    }
}

/// Averages of the cell-centred streamwise velocity over `region`.
pub fn region_statistics(
    field: &StokesField,
    grid: &VoxelGrid,
    diameter: f64,
    region: Region,
) -> Result<RegionStats, PoreError> {
    if field.forcing == 0.0 {
        return Err(PoreError::InvalidInput("permeability needs a nonzero forcing".into()));
    }
    let u = field.cell_centred_x();
    let (mut cells, mut fluid, mut sum) = (0usize, 0usize, 0.0);
    for c in (0..grid.len()).filter(|&c| in_region(grid, c, diameter, region)) {
        cells += 1;
        if !grid.solid[c] {
            fluid += 1;
            sum += u[c];
        }
    }
    if fluid == 0 {
        return Err(PoreError::EmptyRegion);
    }
    let superficial = sum / cells as f64;
    Ok(RegionStats {
        cells,
        porosity: fluid as f64 / cells as f64,
        superficial_velocity: superficial,
        intrinsic_velocity: sum / fluid as f64,
        permeability: field.viscosity * superficial / field.forcing,
    })
}

/// Uniform bins `[lo + i w, lo + (i + 1) w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bins {
    pub lo: f64,
    pub width: f64,
    pub count: usize,
}

impl Bins {
    /// 1325 bins of 8e-10 m/s from -2.6e-7 m/s.
    pub fn raw() -> Self {
        Self { lo: -2.6e-7, width: 8e-10, count: 1325 }
    }

    /// 700 bins of 0.01 from -1, for velocities divided by `U_i`.
    pub fn normalized() -> Self {
        Self { lo: -1.0, width: 0.01, count: 700 }
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.width * self.count as f64
    }

    pub fn left(&self, i: usize) -> f64 {
        self.lo + self.width * i as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + self.width * (i as f64 + 0.5)
    }

    pub fn locate(&self, v: f64) -> Option<usize> {
        let t = ((v - self.lo) / self.width).floor();
        (t >= 0.0 && t < self.count as f64).then_some(t as usize)
    }
}

/// Velocity PDF over uniform bins. `pdf` integrates to `1 - out_of_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityHistogram {
    pub bins: Bins,
    pub normalized: bool,
    pub region: Region,
    pub samples: usize,
    pub pdf: Vec<f64>,
    pub out_of_range: f64,
    /// Sample moments, computed from the velocities rather than the bins.
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub max: f64,
    pub negative_fraction: f64,
}

fn moments(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let sd = m2.sqrt();
    let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    (mean, sd, skew)
}

/// Histogram of cell-centred streamwise velocities over fluid cells.
///
/// With `normalized` every sample is divided by the intrinsic velocity of
/// the whole pore space before binning.
pub fn velocity_pdf(
    field: &StokesField,
    grid: &VoxelGrid,
    diameter: f64,
    region: Region,
    bins: Bins,
    normalized: bool,
) -> Result<VelocityHistogram, PoreError> {
    let u = field.cell_centred_x();
    let scale = if normalized {
        let ui = intrinsic_velocity(field, grid);
        if ui == 0.0 {
            return Err(PoreError::InvalidInput("zero intrinsic velocity".into()));
        }
        1.0 / ui
    } else {
        1.0
    };
    let values: Vec<f64> = (0..grid.len())
        .filter(|&c| !grid.solid[c] && in_region(grid, c, diameter, region))
        .map(|c| u[c] * scale)
        .collect();
    if values.is_empty() {
        return Err(PoreError::EmptyRegion);
    }
    Ok(histogram(&values, bins, normalized, region))
}

/// Bins arbitrary samples.
pub fn histogram(values: &[f64], bins: Bins, normalized: bool, region: Region) -> VelocityHistogram {
    let mut counts = vec![0usize; bins.count];
    let mut outside = 0usize;
    for &v in values {
        match bins.locate(v) {
            Some(i) => counts[i] += 1,
            None => outside += 1,
        }
    }
    let n = values.len() as f64;
    let (mean, std_dev, skewness) = moments(values);
    VelocityHistogram {
        bins,
        normalized,
        region,
        samples: values.len(),
        pdf: counts.iter().map(|&c| c as f64 / (n * bins.width)).collect(),
        out_of_range: outside as f64 / n,
        mean,
        std_dev,
        skewness,
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        negative_fraction: values.iter().filter(|v| **v < 0.0).count() as f64 / n,
    }
}

impl VelocityHistogram {
    /// Probability mass inside the binned range.
    pub fn mass(&self) -> f64 {
        self.pdf.iter().sum::<f64>() * self.bins.width
    }

    /// Centre of the most populated bin (first one on ties).
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, p) in self.pdf.iter().enumerate() {
            if *p > self.pdf[best] {
                best = i;
            }
        }
        self.bins.center(best)
    }

    /// Mass in bins that lie entirely below zero.
    pub fn negative_mass(&self) -> f64 {
        (0..self.bins.count)
            .filter(|&i| self.bins.left(i) + self.bins.width <= 0.0)
            .map(|i| self.pdf[i] * self.bins.width)
            .sum()
    }

    /// Skewness of the binned distribution, using bin centres.
    pub fn binned_skewness(&self) -> f64 {
        let w = self.bins.width;
        let mass = self.mass();
        if mass == 0.0 {
            return 0.0;
        }
        let c = |i: usize| self.bins.center(i);
        let mean = (0..self.bins.count).map(|i| c(i) * self.pdf[i] * w).sum::<f64>() / mass;
        let m2 = (0..self.bins.count).map(|i| (c(i) - mean).powi(2) * self.pdf[i] * w).sum::<f64>() / mass;
        let m3 = (0..self.bins.count).map(|i| (c(i) - mean).powi(3) * self.pdf[i] * w).sum::<f64>() / mass;
        if m2 > 0.0 {
            m3 / m2.powf(1.5)
        } else {
            0.0
        }
    }

    /// `∫ |p - q|` over the common bins.
    pub fn l1_distance(&self, other: &Self) -> Result<f64, PoreError> {
        if self.bins != other.bins {
            return Err(PoreError::BinMismatch);
        }
        Ok(self.pdf.iter().zip(&other.pdf).map(|(a, b)| (a - b).abs()).sum::<f64>() * self.bins.width)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,pdf\n");
        for i in 0..self.bins.count {
            let l = self.bins.left(i);
            s.push_str(&format!("{:e},{:e},{:e}\n", l, l + self.bins.width, self.pdf[i]));
        }
        s
    }
}

/// Arithmetic mean of PDFs over identical bins. Sample statistics are
/// combined as sample-weighted means, except `max`, which is the overall
/// maximum.
pub fn ensemble_average(hists: &[VelocityHistogram]) -> Result<VelocityHistogram, PoreError> {
    let first = hists.first().ok_or(PoreError::InvalidInput("no histograms to average".into()))?;
    if hists.iter().any(|h| h.bins != first.bins || h.normalized != first.normalized) {
        return Err(PoreError::BinMismatch);
    }
    let k = hists.len() as f64;
    let mut out = first.clone();
    for (i, p) in out.pdf.iter_mut().enumerate() {
        *p = hists.iter().map(|h| h.pdf[i]).sum::<f64>() / k;
    }
    out.out_of_range = hists.iter().map(|h| h.out_of_range).sum::<f64>() / k;
    let total: usize = hists.iter().map(|h| h.samples).sum();
    let wmean = |f: &dyn Fn(&VelocityHistogram) -> f64| {
        hists.iter().map(|h| f(h) * h.samples as f64).sum::<f64>() / total as f64
    };
    out.samples = total;
    out.mean = wmean(&|h| h.mean);
    out.std_dev = wmean(&|h| h.std_dev);
    out.skewness = wmean(&|h| h.skewness);
    out.negative_fraction = wmean(&|h| h.negative_fraction);
    out.max = hists.iter().map(|h| h.max).fold(f64::NEG_INFINITY, f64::max);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform_field(grid: &VoxelGrid, value: f64) -> StokesField {
        let n = grid.len();
        let mut velocity = vec![0.0; 3 * n];
        for c in 0..n {
            let other = grid.neighbour(c, 0, false);
            if !grid.solid[c] && !grid.solid[other] {
                velocity[c] = value;
            }
        }
        StokesField {
            dims: grid.dims,
            spacing: grid.spacing,
            viscosity: 1e-3,
            forcing: 0.002,
            velocity,
            pressure: vec![0.0; n],
            iterations: 0,
            momentum_residual: 0.0,
            divergence: 0.0,
            history: vec![],
        }
    }

    #[test]
    fn uniform_flow_statistics() {
        let g = VoxelGrid::open([5, 4, 3], [1.0; 3]);
        let f = uniform_field(&g, 3e-8);
        assert!((intrinsic_velocity(&f, &g) - 3e-8).abs() < 1e-20);
        let h = velocity_pdf(&f, &g, 1.0, Region::Total, Bins::raw(), false).unwrap();
        assert_eq!(h.pdf.iter().filter(|p| **p > 0.0).count(), 1);
        assert!((h.mass() - 1.0).abs() < 1e-12);
        assert_eq!(h.out_of_range, 0.0);
    }

    #[test]
    fn superficial_equals_porosity_times_intrinsic() {
        let mut g = VoxelGrid::open([6, 6, 6], [0.5; 3]);
        for c in 0..g.len() {
            let [_, j, k] = g.coords(c);
            g.solid[c] = j == 0 || (k == 2 && j == 3);
        }
        let mut f = uniform_field(&g, 1.0);
        // make the field non-uniform along x faces
        for c in 0..g.len() {
            f.velocity[c] *= 1.0 + 0.1 * (c % 7) as f64;
        }
        let ui = intrinsic_velocity(&f, &g);
        let sup = superficial_velocity(&f);
        assert!((sup - g.porosity() * ui).abs() <= 1e-12 * sup.abs());
    }

    #[test]
    fn total_region_matches_global_averages() {
        let mut g = VoxelGrid::open([8, 8, 8], [0.5; 3]);
        for c in 0..g.len() {
            let [i, j, _] = g.coords(c);
            g.solid[c] = j == 0 || (i == 3 && j == 4);
        }
        let f = uniform_field(&g, 2.0);
        let t = region_statistics(&f, &g, 1.0, Region::Total).unwrap();
        assert_eq!(t.cells, g.len());
        assert!((t.porosity - g.porosity()).abs() < 1e-15);
        assert!((t.superficial_velocity - superficial_velocity(&f)).abs() < 1e-12);
        assert!((t.permeability - permeability(&f).unwrap()).abs() < 1e-15);
        let inner = region_statistics(&f, &g, 0.5, Region::Inner).unwrap();
        // margin 0.75 leaves cells 2..=5 along each axis
        assert_eq!(inner.cells, 64);
    }

    #[test]
    fn kozeny_values() {
        let bk = blake_kozeny(2e-3, 0.36).unwrap();
        assert!((bk - 3.04e-9).abs() < 0.01e-9, "{bk}");
        let ck = carman_kozeny(2e-3, 0.36).unwrap();
        assert!((ck / bk - 150.0 / 180.0).abs() < 1e-14);
        assert!((blake_kozeny(2e-3, 0.40).unwrap() - 4.74e-9).abs() < 0.01e-9);
        assert!(blake_kozeny(2e-3, 1e-6).unwrap() < 1e-20);
        assert!(blake_kozeny(2e-3, 1.0).is_err());
        assert!(blake_kozeny(2e-3, 0.0).is_err());
    }

    #[test]
    fn inner_region_can_be_empty() {
        let g = VoxelGrid::open([4, 4, 4], [1.0; 3]);
        let f = uniform_field(&g, 1.0);
        assert!(matches!(
            velocity_pdf(&f, &g, 1.0, Region::Inner, Bins::normalized(), true),
            Err(PoreError::EmptyRegion)
        ));
    }

    #[test]
    fn default_bins_place_zero_on_an_edge() {
        let b = Bins::raw();
        assert!((b.hi() - 8e-7).abs() < 1e-18);
        assert_eq!(b.locate(0.0), Some(325));
        assert_eq!(b.locate(-1e-12), Some(324));
        assert_eq!(Bins::normalized().locate(0.0), Some(100));
    }

    #[test]
    fn ensemble_rejects_mismatched_bins() {
        let a = histogram(&[0.1, 0.2], Bins::normalized(), true, Region::Total);
        let mut b = a.clone();
        b.bins.width = 0.02;
        assert!(matches!(ensemble_average(&[a, b]), Err(PoreError::BinMismatch)));
    }

    proptest! {
        #[test]
        fn pdf_mass_accounts_for_everything(values in prop::collection::vec(-3.0f64..8.0, 1..400)) {
            let h = histogram(&values, Bins::normalized(), true, Region::Total);
            prop_assert!((h.mass() + h.out_of_range - 1.0).abs() < 1e-12);
            prop_assert!(h.pdf.iter().all(|p| *p >= 0.0));
        }

        #[test]
        fn ensemble_of_copies_is_identity(values in prop::collection::vec(-1.0f64..6.0, 1..200), k in 1usize..5) {
            let h = histogram(&values, Bins::normalized(), true, Region::Total);
            let hs = vec![h.clone(); k];
            let e = ensemble_average(&hs).unwrap();
            for (a, b) in e.pdf.iter().zip(&h.pdf) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            prop_assert!((e.mass() - h.mass()).abs() < 1e-12);
        }
    }
}
