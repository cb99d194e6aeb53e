use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PoreError;

/// Equal spheres in a box that is periodic along all three axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpherePack {
    #[serde(rename = "box")]
    pub domain: [f64; 3],
    pub diameter: f64,
    pub centers: Vec<[f64; 3]>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Minimum-image separation vector `b - a`.
pub(crate) fn periodic_delta(a: &[f64; 3], b: &[f64; 3], l: &[f64; 3]) -> [f64; 3] {
    let mut d = [0.0; 3];
    for k in 0..3 {
        let mut x = b[k] - a[k];
        x -= l[k] * (x / l[k]).round();
        d[k] = x;
    }
    d
}

fn wrap(x: f64, l: f64) -> f64 {
    let mut y = x.rem_euclid(l);
    if y >= l {
        y -= l;
    }
    y
}

impl SpherePack {
    pub fn new(domain: [f64; 3], diameter: f64, centers: Vec<[f64; 3]>) -> Result<Self, PoreError> {
        if !(diameter > 0.0) || domain.iter().any(|l| !(*l > 0.0)) {
            return Err(PoreError::InvalidInput("diameter and box edges must be positive".into()));
        }
        let centers = centers
            .into_iter()
            .map(|c| [wrap(c[0], domain[0]), wrap(c[1], domain[1]), wrap(c[2], domain[2])])
            .collect();
        Ok(Self { domain, diameter, centers, seed: None })
    }

    pub fn empty(domain: [f64; 3], diameter: f64) -> Result<Self, PoreError> {
        Self::new(domain, diameter, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.domain.iter().product()
    }

    /// Porosity of the ideal (unvoxelized) pack.
    pub fn porosity(&self) -> f64 {
        1.0 - self.len() as f64 * PI * self.diameter.powi(3) / 6.0 / self.volume()
    }

    /// Pairs closer than `D (1 - 1e-12)` under the periodic metric.
    pub fn overlaps(&self) -> Vec<(usize, usize)> {
        let d2 = (self.diameter * (1.0 - 1e-12)).powi(2);
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let d = periodic_delta(&self.centers[i], &self.centers[j], &self.domain);
                if d.iter().map(|v| v * v).sum::<f64>() < d2 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.overlaps().is_empty() && self.centers.iter().all(|c| (0..3).all(|k| c[k] >= 0.0 && c[k] < self.domain[k]))
    }
}

/// Two hexagonal layers of four spheres in the box `(2, √3, √3)·D`
/// (`(4, 2√3, 2√3)` mm for 2 mm spheres). This is the densest arrangement
/// that box admits; its ideal porosity is `1 - 2π/9`.
pub fn hexagonal_pack(d: f64) -> Result<SpherePack, PoreError> {
    let s3 = 3f64.sqrt();
    let domain = [2.0 * d, s3 * d, s3 * d];
    let mut centers = Vec::new();
    for (layer, z) in [(0, 0.0), (1, 0.5 * s3 * d)] {
        let (ox, oy) = if layer == 0 { (0.0, 0.0) } else { (0.5 * d, s3 / 6.0 * d) };
        for row in 0..2 {
            for col in 0..2 {
                let x = col as f64 * d + row as f64 * 0.5 * d + ox;
                let y = row as f64 * 0.5 * s3 * d + oy;
                centers.push([x, y, z]);
            }
        }
    }
    SpherePack::new(domain, d, centers)
}

/// Hexagonal close packing (AB stacking) in its smallest periodic box
/// `(2, √3, 2√(2/3))·D`, porosity `1 - π/(3√2)`. Repeated `reps` times
/// per axis.
pub fn close_packed_pack(d: f64, reps: [usize; 3]) -> Result<SpherePack, PoreError> {
    let s3 = 3f64.sqrt();
    let layer = (2.0f64 / 3.0).sqrt() * d;
    let cell = [2.0 * d, s3 * d, 2.0 * layer];
    let mut base = Vec::new();
    for l in 0..2 {
        let (ox, oy) = if l == 0 { (0.0, 0.0) } else { (0.5 * d, s3 / 6.0 * d) };
        for row in 0..2 {
            for col in 0..2 {
                base.push([
                    col as f64 * d + row as f64 * 0.5 * d + ox,
                    row as f64 * 0.5 * s3 * d + oy,
                    l as f64 * layer,
                ]);
            }
        }
    }
    let mut centers = Vec::new();
    for a in 0..reps[0] {
        for b in 0..reps[1] {
            for c in 0..reps[2] {
                for p in &base {
                    centers.push([p[0] + a as f64 * cell[0], p[1] + b as f64 * cell[1], p[2] + c as f64 * cell[2]]);
                }
            }
        }
    }
    let domain = [cell[0] * reps[0] as f64, cell[1] * reps[1] as f64, cell[2] * reps[2] as f64];
    SpherePack::new(domain, d, centers)
}

/// Controls for [`random_pack`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomPackOptions {
    /// Consecutive failed insertion attempts tolerated per placed sphere.
    pub rejection_budget: usize,
    /// Stop densifying once the ideal porosity reaches this value.
    pub target_porosity: f64,
    /// Random candidate positions examined per added sphere; the one
    /// farthest from its nearest neighbour is used.
    pub candidates: usize,
    /// Relaxation steps per densification attempt.
    pub relax_steps: usize,
    /// Added spheres that may be dropped again before densification gives up.
    pub max_removals: usize,
}

impl Default for RandomPackOptions {
    fn default() -> Self {
        Self {
            rejection_budget: 100_000,
            target_porosity: 0.40,
            candidates: 2000,
            relax_steps: 20_000,
            max_removals: 50,
        }
    }
}

/// Uniform-grid neighbour search over a periodic box.
struct CellList {
    n: [usize; 3],
    size: [f64; 3],
    heads: Vec<Vec<usize>>,
}

impl CellList {
    fn new(domain: &[f64; 3], d: f64) -> Self {
        let n = [0, 1, 2].map(|k| ((domain[k] / d).floor() as usize).max(1));
        let size = [0, 1, 2].map(|k| domain[k] / n[k] as f64);
        Self { n, size, heads: vec![Vec::new(); n[0] * n[1] * n[2]] }
    }

    fn cell_of(&self, p: &[f64; 3]) -> [usize; 3] {
        [0, 1, 2].map(|k| ((p[k] / self.size[k]) as usize).min(self.n[k] - 1))
    }

    fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.n[0] * (c[1] + self.n[1] * c[2])
    }

    fn insert(&mut self, id: usize, p: &[f64; 3]) {
        let i = self.index(self.cell_of(p));
        self.heads[i].push(id);
    }

    fn rebuild(&mut self, centers: &[[f64; 3]]) {
        self.heads.iter_mut().for_each(Vec::clear);
        for (i, c) in centers.iter().enumerate() {
            self.insert(i, c);
        }
    }

    /// Distinct cells in the 3×3×3 block around `p`.
    fn neighbourhood(&self, p: &[f64; 3]) -> Vec<usize> {
        let c = self.cell_of(p);
        let mut out = Vec::with_capacity(27);
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let q = [dx, dy, dz];
                    let cc = [0, 1, 2].map(|k| (c[k] as i64 + q[k]).rem_euclid(self.n[k] as i64) as usize);
                    out.push(self.index(cc));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn fits(p: &[f64; 3], centers: &[[f64; 3]], grid: &CellList, l: &[f64; 3], d2: f64) -> bool {
    grid.neighbourhood(p).into_iter().all(|cell| {
        grid.heads[cell].iter().all(|&j| {
            let d = periodic_delta(p, &centers[j], l);
            d.iter().map(|v| v * v).sum::<f64>() >= d2
        })
    })
}

/// Distance from `p` to the nearest centre, capped at `d`.
fn nearest_distance(p: &[f64; 3], centers: &[[f64; 3]], grid: &CellList, l: &[f64; 3], d: f64) -> f64 {
    let mut best = d * d;
    for cell in grid.neighbourhood(p) {
        for &j in &grid.heads[cell] {
            let dv = periodic_delta(p, &centers[j], l);
            best = best.min(dv.iter().map(|v| v * v).sum::<f64>());
        }
    }
    best.sqrt()
}

/// Index (at or after `from`) of the sphere with the largest summed overlap.
fn most_overlapped(centers: &[[f64; 3]], from: usize, l: &[f64; 3], d: f64) -> usize {
    let mut grid = CellList::new(l, d);
    grid.rebuild(centers);
    let mut best = (f64::NEG_INFINITY, from);
    for i in from..centers.len() {
        let mut load = 0.0;
        for cell in grid.neighbourhood(&centers[i]) {
            for &j in &grid.heads[cell] {
                if j != i {
                    let dv = periodic_delta(&centers[i], &centers[j], l);
                    load += (d - dv.iter().map(|v| v * v).sum::<f64>().sqrt()).max(0.0);
                }
            }
        }
        if load > best.0 {
            best = (load, i);
        }
    }
    best.1
}

/// Removes overlaps by minimizing the soft-sphere energy
/// `½ Σ (D' - r)²` over overlapping pairs, `D' = D (1 + 1e-3)`, with the
/// FIRE scheme. `face[i] = Some(axis)` keeps sphere `i` on its face (its
/// coordinate along `axis` is frozen); spheres past the end of `face` move
/// freely. Returns `true` once
/// every pair is at least `D` apart; `false` if the energy settles at a
/// jammed state or `steps` runs out.
fn relax(centers: &mut [[f64; 3]], face: &[Option<usize>], l: &[f64; 3], d: f64, steps: usize) -> bool {
    const DT_MAX: f64 = 0.2;
    const ALPHA0: f64 = 0.1;
    let n = centers.len();
    let mut grid = CellList::new(l, d);
    let target = 1.0 + 1e-3;
    let mut vel = vec![[0.0f64; 3]; n];
    let mut force = vec![[0.0f64; 3]; n];
    let (mut dt, mut alpha, mut since_reset) = (0.05f64, ALPHA0, 0usize);
    for _ in 0..steps {
        grid.rebuild(centers);
        force.iter_mut().for_each(|f| *f = [0.0; 3]);
        let mut worst = 0.0f64;
        let mut fmax = 0.0f64;
        for i in 0..n {
            for cell in grid.neighbourhood(&centers[i]) {
                for &j in &grid.heads[cell] {
                    if j == i {
                        continue;
                    }
                    let dv = periodic_delta(&centers[j], &centers[i], l);
                    let r = dv.iter().map(|v| v * v).sum::<f64>().sqrt() / d;
                    if r >= target {
                        continue;
                    }
                    worst = worst.max(1.0 - r);
                    let dir = if r > 1e-14 {
                        dv.map(|v| v / (r * d))
                    } else if i > j {
                        [1.0, 0.0, 0.0]
                    } else {
                        [-1.0, 0.0, 0.0]
                    };
                    for k in 0..3 {
                        force[i][k] += (target - r) * dir[k];
                    }
                }
            }
            if let Some(Some(axis)) = face.get(i) {
                force[i][*axis] = 0.0;
            }
            fmax = fmax.max(force[i].iter().map(|f| f * f).sum::<f64>().sqrt());
        }
        if worst <= 1e-12 {
            return true;
        }
        if fmax < 1e-9 {
            return false;
        }
        let power: f64 = (0..n).map(|i| (0..3).map(|k| force[i][k] * vel[i][k]).sum::<f64>()).sum();
        if power > 0.0 {
            let vn: f64 = (0..n).map(|i| vel[i].iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt();
            let fnorm: f64 = (0..n).map(|i| force[i].iter().map(|f| f * f).sum::<f64>()).sum::<f64>().sqrt();
            for i in 0..n {
                for k in 0..3 {
                    vel[i][k] = (1.0 - alpha) * vel[i][k] + alpha * vn * force[i][k] / fnorm;
                }
            }
            since_reset += 1;
            if since_reset > 5 {
                dt = (dt * 1.1).min(DT_MAX);
                alpha *= 0.99;
            }
        } else {
            vel.iter_mut().for_each(|v| *v = [0.0; 3]);
            dt *= 0.5;
            alpha = ALPHA0;
            since_reset = 0;
        }
        for i in 0..n {
            for k in 0..3 {
                vel[i][k] += dt * force[i][k];
                centers[i][k] = wrap(centers[i][k] + dt * vel[i][k] * d, l[k]);
            }
        }
    }
    false
}

/// Random periodic pack built in three stages:
///
/// 1. spheres are seeded with their centres on the three periodic faces
///    (`x = 0`, `y = 0`, `z = 0`) by random sequential insertion;
/// 2. the interior is filled by random sequential insertion until
///    `rejection_budget` consecutive attempts fail;
/// 3. the spheres still missing for the target porosity are placed, one
///    after another, into the largest of a set of random candidate holes, and
///    all overlaps are relaxed away collectively; face spheres may slide
///    within their face but never leave it.
///    If the relaxation jams, the most compressed added sphere is removed and
///    the relaxation resumes.
pub fn random_pack(domain: [f64; 3], d: f64, seed: u64, options: &RandomPackOptions) -> Result<SpherePack, PoreError> {
    if !(d > 0.0) {
        return Err(PoreError::InvalidInput("diameter must be positive".into()));
    }
    if domain.iter().any(|l| *l < 4.0 * d) {
        return Err(PoreError::BoxTooSmall { domain, diameter: d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d2 = d * d;
    let mut centers: Vec<[f64; 3]> = Vec::new();
    let mut grid = CellList::new(&domain, d);

    let place = |centers: &mut Vec<[f64; 3]>, grid: &mut CellList, rng: &mut ChaCha8Rng, axis: Option<usize>| {
        let mut fails = 0;
        while fails < options.rejection_budget {
            let mut p = [0, 1, 2].map(|k| rng.random::<f64>() * domain[k]);
            if let Some(a) = axis {
                p[a] = 0.0;
            }
            if fits(&p, centers, grid, &domain, d2) {
                grid.insert(centers.len(), &p);
                centers.push(p);
                fails = 0;
            } else {
                fails += 1;
            }
        }
    };
    let mut face = Vec::new();
    for axis in 0..3 {
        place(&mut centers, &mut grid, &mut rng, Some(axis));
        face.resize(centers.len(), Some(axis));
    }
    place(&mut centers, &mut grid, &mut rng, None);

    let sphere = PI * d.powi(3) / 6.0;
    let vol: f64 = domain.iter().product();
    let target_n = ((1.0 - options.target_porosity) * vol / sphere).floor() as usize;
    let first_new = centers.len();
    while centers.len() < target_n {
        grid.rebuild(&centers);
        let mut best = (f64::NEG_INFINITY, [0.0; 3]);
        for _ in 0..options.candidates {
            let p = [0, 1, 2].map(|k| rng.random::<f64>() * domain[k]);
            let gap = nearest_distance(&p, &centers, &grid, &domain, d);
            if gap > best.0 {
                best = (gap, p);
            }
        }
        centers.push(best.1);
    }
    let mut removed = 0;
    while !relax(&mut centers, &face, &domain, d, options.relax_steps) {
        // drop the most compressed of the added spheres and carry on
        removed += 1;
        if removed > options.max_removals || centers.len() == first_new {
            centers.truncate(first_new);
            break;
        }
        let worst = most_overlapped(&centers, first_new, &domain, d);
        centers.swap_remove(worst);
    }
    let mut pack = SpherePack::new(domain, d, centers)?;
    pack.seed = Some(seed);
    Ok(pack)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hexagonal_pack_geometry() {
        let p = hexagonal_pack(2e-3).unwrap();
        let s3 = 3f64.sqrt();
        for (a, b) in p.domain.iter().zip([4e-3, 2e-3 * s3, 2e-3 * s3]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(p.len(), 8);
        assert!(p.is_valid());
        assert!((p.porosity() - (1.0 - 2.0 * PI / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn close_packed_porosity() {
        let p = close_packed_pack(1.0, [1, 1, 1]).unwrap();
        assert!(p.is_valid());
        assert!((p.porosity() - (1.0 - PI / (3.0 * 2f64.sqrt()))).abs() < 1e-12);
        assert!((p.porosity() - 0.2595).abs() < 1e-4);
        // every sphere touches twelve neighbours
        let q = close_packed_pack(1.0, [2, 2, 2]).unwrap();
        assert!(q.is_valid());
        for i in 0..q.len() {
            let touching = (0..q.len())
                .filter(|&j| j != i)
                .filter(|&j| {
                    let d = periodic_delta(&q.centers[i], &q.centers[j], &q.domain);
                    (d.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-9
                })
                .count();
            assert_eq!(touching, 12);
        }
    }

    #[test]
    fn random_pack_is_valid_and_reproducible() {
        let opts = RandomPackOptions { rejection_budget: 2000, ..Default::default() };
        let a = random_pack([4.0; 3], 1.0, 3, &opts).unwrap();
        let b = random_pack([4.0; 3], 1.0, 3, &opts).unwrap();
        let c = random_pack([4.0; 3], 1.0, 4, &opts).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.centers, c.centers);
        assert!(a.is_valid());
        assert!((0.36..=0.45).contains(&a.porosity()), "porosity {}", a.porosity());
    }

    #[test]
    fn small_box_is_rejected() {
        assert!(matches!(
            random_pack([3.0, 4.0, 4.0], 1.0, 0, &RandomPackOptions::default()),
            Err(PoreError::BoxTooSmall { .. })
        ));
    }

    #[test]
    fn centres_are_wrapped_into_the_box() {
        let p = SpherePack::new([2.0; 3], 1.0, vec![[-0.5, 2.0, 5.25]]).unwrap();
        assert_eq!(p.centers[0], [1.5, 0.0, 1.25]);
    }
}
