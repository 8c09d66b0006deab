//! From raw plane measurements to inversion inputs: noise, k-derivatives,
//! the boundary function `psi = d_k g / g`, target localisation and the
//! assembly of Dirichlet data on the six faces.

use crate::boundary::{BoundaryIndex, BoundaryTrace, Face};
use crate::error::{Error, Result};
use crate::field::{ScalarField3, C64, I, ZERO};
use crate::freq::FrequencyGrid;
use crate::grid::Grid3;
use crate::measurement::MeasurementSet;
use crate::ops::log_gradient;
use crate::plane::{PlaneField, PlaneGrid};
use crate::propagate::{AngularSpectrum, Travel, DEFAULT_PAD_FACTOR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Smallest `|g|` accepted as a divisor.
pub const DATA_FLOOR: f64 = 1e-8;

/// Default search range in `z` for targets.
pub const TARGET_Z_RANGE: (f64, f64) = (-0.75, 1.0);

/// Perturb every plane field by `level * ||g|| * sigma / ||sigma||`, where the
/// real and imaginary parts of `sigma` are independent uniform draws on
/// `(-1, 1)`.
pub fn add_noise(m: &MeasurementSet, level: f64, seed: u64) -> Result<MeasurementSet> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::invalid(format!("noise level must be non-negative, got {level}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = m.try_map(|_, g| {
        let sigma: Vec<C64> = (0..g.values().len())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        if level == 0.0 {
            return Ok(g.clone());
        }
        let g_norm = g.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let s_norm = sigma.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let scale = level * g_norm / s_norm;
        let values = g.values().iter().zip(&sigma).map(|(v, s)| v + s * scale).collect();
        PlaneField::new(*g.grid(), g.k(), values)
    })?;
    out.noise_level = Some(level);
    Ok(out)
}

/// `d_k g(k_n) ~ (g(k_{n-1}) - g(k_n)) / (k_{n-1} - k_n)` for `n = 1..N`.
pub fn k_derivative(m: &MeasurementSet) -> Result<Vec<PlaneField>> {
    let s = m.samples();
    if s.len() < 2 {
        return Err(Error::invalid("k_derivative needs at least two frequencies"));
    }
    (1..s.len())
        .map(|n| {
            let dk = s[n - 1].k() - s[n].k();
            let values = s[n - 1].values().iter().zip(s[n].values()).map(|(a, b)| (a - b) / dk).collect();
            PlaneField::new(*s[n].grid(), s[n].k(), values)
        })
        .collect()
}

fn quotient(dg: C64, g: C64) -> Option<C64> {
    (g.norm() >= DATA_FLOOR).then(|| dg / g)
}

/// Pointwise `dg / g` on the boundary; fails at the first node with `|g|`
/// below [`DATA_FLOOR`].
pub fn boundary_psi(g: &BoundaryTrace, dg: &BoundaryTrace) -> Result<BoundaryTrace> {
    g.ensure_compatible(dg.grid())?;
    let grid = *g.grid();
    let values = g
        .iter()
        .zip(dg.values())
        .map(|((idx, gv), &dv)| {
            quotient(dv, gv).ok_or(Error::DataFloor { node: grid.ijk(idx), magnitude: gv.norm() })
        })
        .collect::<Result<Vec<_>>>()?;
    BoundaryTrace::new(g.index().clone(), values)
}

/// Pointwise `dg / g` on a plane.
pub fn plane_psi(g: &PlaneField, dg: &PlaneField) -> Result<PlaneField> {
    if g.grid() != dg.grid() {
        return Err(Error::GridMismatch("plane_psi arguments live on different planes".into()));
    }
    let nx = g.grid().nx;
    let values = g
        .values()
        .iter()
        .zip(dg.values())
        .enumerate()
        .map(|(n, (&gv, &dv))| quotient(dv, gv).ok_or(Error::DataFloor { node: [n % nx, n / nx, 0], magnitude: gv.norm() }))
        .collect::<Result<Vec<_>>>()?;
    PlaneField::new(*g.grid(), g.k(), values)
}

/// One connected target footprint on the localisation plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetComponent {
    /// Plane sample indices `(i, j)` in the component.
    pub nodes: Vec<(usize, usize)>,
    pub peak: (usize, usize),
    pub peak_value: f64,
    /// Centroid of the footprint in `(x, y)`.
    pub center: (f64, f64),
}

/// Footprints of the detected targets and the depth range searched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRegion {
    pub plane: PlaneGrid,
    pub components: Vec<TargetComponent>,
    pub z_range: (f64, f64),
    #[serde(skip)]
    lookup: Vec<u32>,
}

impl TargetRegion {
    pub fn new(plane: PlaneGrid, components: Vec<TargetComponent>, z_range: (f64, f64)) -> Result<Self> {
        if !(z_range.0 < z_range.1) {
            return Err(Error::invalid(format!("empty z range {z_range:?}")));
        }
        let mut lookup = vec![u32::MAX; plane.len()];
        for (c, comp) in components.iter().enumerate() {
            if comp.nodes.is_empty() {
                return Err(Error::invalid("target component without nodes"));
            }
            for &(i, j) in &comp.nodes {
                if i >= plane.nx || j >= plane.ny {
                    return Err(Error::invalid("target node outside the plane"));
                }
                let slot = &mut lookup[j * plane.nx + i];
                if *slot != u32::MAX {
                    return Err(Error::invalid("target components overlap"));
                }
                *slot = c as u32;
            }
        }
        Ok(Self { plane, components, z_range, lookup })
    }

    pub fn empty(plane: PlaneGrid) -> Self {
        Self { plane, components: Vec::new(), z_range: TARGET_Z_RANGE, lookup: vec![u32::MAX; plane.len()] }
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Rebuild the lookup table after deserialisation.
    pub fn reindexed(self) -> Result<Self> {
        Self::new(self.plane, self.components, self.z_range)
    }

    /// Component whose footprint contains `(x, y)` (nearest plane sample).
    pub fn component_at(&self, x: f64, y: f64) -> Option<usize> {
        let p = &self.plane;
        let i = ((x - p.x0) / p.dx).round();
        let j = ((y - p.y0) / p.dy).round();
        if i < 0.0 || j < 0.0 || i >= p.nx as f64 || j >= p.ny as f64 {
            return None;
        }
        match self.lookup.get(j as usize * p.nx + i as usize) {
            Some(&c) if c != u32::MAX => Some(c as usize),
            _ => None,
        }
    }

    /// Component containing the point, counting only the open `z` range.
    pub fn component_containing(&self, x: [f64; 3]) -> Option<usize> {
        if x[2] > self.z_range.0 && x[2] < self.z_range.1 {
            self.component_at(x[0], x[1])
        } else {
            None
        }
    }
}

/// Detect targets as super-level sets of `|f|` around its dominant peaks.
///
/// Peaks are maxima over their 5x5 neighbourhood above half the global
/// maximum, ties going to the first sample in raster order. Each grows by 4-connected flood fill over `|f| > ratio * peak`;
/// footprints that share a sample are merged.
pub fn locate_targets(f: &PlaneField, threshold_ratio: f64) -> Result<TargetRegion> {
    if !(threshold_ratio > 0.0 && threshold_ratio < 1.0) {
        return Err(Error::invalid(format!("threshold ratio must lie in (0, 1), got {threshold_ratio}")));
    }
    let g = *f.grid();
    let (nx, ny) = (g.nx, g.ny);
    let mag: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();
    let gmax = mag.iter().copied().fold(0.0, f64::max);
    let mean = mag.iter().sum::<f64>() / mag.len() as f64;
    let mut peaks = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let v = mag[j * nx + i];
            if v <= 0.5 * gmax || v - mean <= 1e-9 * gmax {
                continue;
            }
            let strict = (j.saturating_sub(2)..(j + 3).min(ny))
                .all(|jj| {
                    (i.saturating_sub(2)..(i + 3).min(nx)).all(|ii| {
                        let w = mag[jj * nx + ii];
                        (ii, jj) == (i, j) || w < v || (w == v && (jj, ii) > (j, i))
                    })
                });
            if strict {
                peaks.push((i, j, v));
            }
        }
    }
    if peaks.is_empty() {
        log::warn!("no peak found in the localisation data; the target region is empty");
        return Ok(TargetRegion::empty(g));
    }
    peaks.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.1, a.0).cmp(&(b.1, b.0))));

    // Flood fill each peak, then merge fills that share a sample.
    let mut owner = vec![usize::MAX; nx * ny];
    let mut parent: Vec<usize> = (0..peaks.len()).collect();
    fn root(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for (p, &(pi, pj, pv)) in peaks.iter().enumerate() {
        let level = threshold_ratio * pv;
        let mut seen = vec![false; nx * ny];
        let mut stack = vec![(pi, pj)];
        seen[pj * nx + pi] = true;
        while let Some((i, j)) = stack.pop() {
            let idx = j * nx + i;
            if owner[idx] == usize::MAX {
                owner[idx] = p;
            } else {
                let (a, b) = (root(&mut parent, owner[idx]), root(&mut parent, p));
                parent[a.max(b)] = a.min(b);
            }
            let mut push = |ii: usize, jj: usize| {
                let n = jj * nx + ii;
                if !seen[n] && mag[n] > level {
                    seen[n] = true;
                    stack.push((ii, jj));
                }
            };
            if i > 0 {
                push(i - 1, j);
            }
            if i + 1 < nx {
                push(i + 1, j);
            }
            if j > 0 {
                push(i, j - 1);
            }
            if j + 1 < ny {
                push(i, j + 1);
            }
        }
    }
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::new(); peaks.len()];
    for j in 0..ny {
        for i in 0..nx {
            let o = owner[j * nx + i];
            if o != usize::MAX {
                let r = root(&mut parent, o);
                groups[r].push((i, j));
            }
        }
    }
    let components = groups
        .into_iter()
        .enumerate()
        .filter(|(_, nodes)| !nodes.is_empty())
        .map(|(r, nodes)| {
            let (pi, pj, pv) = peaks[r];
            let cx = nodes.iter().map(|&(i, _)| g.x(i)).sum::<f64>() / nodes.len() as f64;
            let cy = nodes.iter().map(|&(_, j)| g.y(j)).sum::<f64>() / nodes.len() as f64;
            TargetComponent { nodes, peak: (pi, pj), peak_value: pv, center: (cx, cy) }
        })
        .collect();
    TargetRegion::new(g, components, TARGET_Z_RANGE)
}

/// The `z = z_min` face of `grid` as a plane lattice.
pub fn gamma_plane(grid: &Grid3) -> PlaneGrid {
    PlaneGrid {
        z: grid.origin[2],
        nx: grid.dims[0],
        ny: grid.dims[1],
        x0: grid.origin[0],
        y0: grid.origin[1],
        dx: grid.spacing[0],
        dy: grid.spacing[1],
    }
}

/// Propagated data restricted to the face lattice of `Gamma`.
#[derive(Debug, Clone)]
pub struct GammaData {
    /// Total field at every `k_n`.
    pub g: Vec<PlaneField>,
    /// `d/dz` of the total field at `k_bar`.
    pub dz_bar: PlaneField,
}

/// Resample propagated total data (on a plane at `z = z_min` of `grid`) onto
/// the face nodes, and differentiate it in `z` by propagating the scattered
/// part a further `epsilon`.
pub fn gamma_data(propagated: &MeasurementSet, grid: &Grid3, travel: Travel, epsilon: f64) -> Result<GammaData> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let face = gamma_plane(grid);
    if (propagated.plane().z - face.z).abs() > 1e-9 {
        return Err(Error::GridMismatch(format!(
            "propagated plane z = {} does not coincide with the face z = {}",
            propagated.plane().z,
            face.z
        )));
    }
    let xs: Vec<f64> = (0..face.nx).map(|i| face.x(i)).collect();
    let ys: Vec<f64> = (0..face.ny).map(|j| face.y(j)).collect();
    let mut g = Vec::with_capacity(propagated.samples().len());
    let mut dz_bar = None;
    for (n, s) in propagated.samples().iter().enumerate() {
        let k = s.k();
        let inc = C64::from_polar(1.0, k * face.z);
        let scattered = s.map(|v| v - inc);
        let spec = AngularSpectrum::new(&scattered, travel, DEFAULT_PAD_FACTOR)?;
        let here = spec.sample(face.z, &xs, &ys, 0);
        if n == 0 {
            let ahead = spec.sample(face.z + epsilon, &xs, &ys, 0);
            let d_inc = I * k * inc;
            let values = ahead.iter().zip(&here).map(|(a, b)| (a - b) / epsilon + d_inc).collect();
            dz_bar = Some(PlaneField::new(face, k, values)?);
        }
        g.push(PlaneField::new(face, k, here.into_iter().map(|v| v + inc).collect())?);
    }
    Ok(GammaData { g, dz_bar: dz_bar.expect("at least one frequency") })
}

/// In-plane second-order differences `(d_x f, d_y f)`.
pub fn plane_gradient(f: &PlaneField) -> Result<(PlaneField, PlaneField)> {
    let g = *f.grid();
    if g.nx < 3 || g.ny < 3 {
        return Err(Error::invalid("plane gradient needs at least 3 samples per axis"));
    }
    let d = |n: usize, at: &dyn Fn(usize) -> C64, h: f64, p: usize| -> C64 {
        if p == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if p + 1 == n {
            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
        } else {
            (at(p + 1) - at(p - 1)) / (2.0 * h)
        }
    };
    let mut dx = Vec::with_capacity(g.len());
    let mut dy = Vec::with_capacity(g.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            dx.push(d(g.nx, &|ii| f.at(ii, j), g.dx, i));
            dy.push(d(g.ny, &|jj| f.at(i, jj), g.dy, j));
        }
    }
    Ok((PlaneField::new(g, f.k(), dx)?, PlaneField::new(g, f.k(), dy)?))
}

/// Dirichlet data for the inversion on all six faces.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    grid: Grid3,
    freqs: FrequencyGrid,
    g: Vec<BoundaryTrace>,
    psi: Vec<BoundaryTrace>,
    tail: [BoundaryTrace; 3],
    measured: [bool; 6],
}

impl BoundaryData {
    /// `g[n]` is the total field at `k_n`, `tail` the traces of `grad u / u`
    /// at `k_bar`. `psi` is the difference quotient of `g` on measured faces
    /// and `i z` on completed faces.
    pub fn new(freqs: FrequencyGrid, g: Vec<BoundaryTrace>, tail: [BoundaryTrace; 3], measured: [bool; 6]) -> Result<Self> {
        if g.len() != freqs.n() + 1 {
            return Err(Error::invalid(format!("{} boundary traces for {} wavenumbers", g.len(), freqs.n() + 1)));
        }
        let grid = *g[0].grid();
        for t in g.iter().chain(tail.iter()) {
            t.ensure_compatible(&grid)?;
        }
        let index = g[0].index().clone();
        let on_measured: Vec<bool> = index
            .nodes()
            .iter()
            .map(|&idx| {
                let ijk = grid.ijk(idx);
                Face::ALL.iter().any(|f| measured[f.ordinal()] && f.contains(&grid, ijk))
            })
            .collect();
        let mut psi = Vec::with_capacity(freqs.n());
        for n in 1..=freqs.n() {
            let dk = freqs.k(n - 1) - freqs.k(n);
            let values = index
                .nodes()
                .iter()
                .enumerate()
                .map(|(s, &idx)| {
                    if on_measured[s] {
                        let gv = g[n].values()[s];
                        let dg = (g[n - 1].values()[s] - gv) / dk;
                        quotient(dg, gv).ok_or(Error::DataFloor { node: grid.ijk(idx), magnitude: gv.norm() })
                    } else {
                        Ok(I * grid.node_at(idx)[2])
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            psi.push(BoundaryTrace::new(index.clone(), values)?);
        }
        Ok(Self { grid, freqs, g, psi, tail, measured })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn freqs(&self) -> &FrequencyGrid {
        &self.freqs
    }

    /// Total field trace at `k_n`, `n = 0..N`.
    pub fn g(&self, n: usize) -> &BoundaryTrace {
        &self.g[n]
    }

    /// `psi_n` for `n = 1..N`.
    pub fn psi(&self, n: usize) -> &BoundaryTrace {
        assert!(n >= 1 && n <= self.freqs.n(), "psi index {n} out of range");
        &self.psi[n - 1]
    }

    /// Traces of the three components of `grad u / u` at `k_bar`.
    pub fn tail_traces(&self) -> &[BoundaryTrace; 3] {
        &self.tail
    }

    /// Whether each face (in [`Face::ALL`] order) carries measured data.
    pub fn measured(&self) -> [bool; 6] {
        self.measured
    }
}

fn check_gamma(gamma: &GammaData, freqs: &FrequencyGrid, grid: &Grid3) -> Result<()> {
    let face = gamma_plane(grid);
    if gamma.g.len() != freqs.n() + 1 {
        return Err(Error::invalid("one face field per wavenumber is required"));
    }
    for (n, p) in gamma.g.iter().chain(std::iter::once(&gamma.dz_bar)).enumerate() {
        if (p.z() - face.z).abs() > 1e-9 || !p.grid().same_sampling(&face) {
            return Err(Error::GridMismatch(format!("face field {n} does not sample the z = {} face of the grid", face.z)));
        }
    }
    Ok(())
}

/// `grad g / g` on the face nodes of `Gamma` at `k_bar`.
fn gamma_log_gradient(gamma: &GammaData) -> Result<[PlaneField; 3]> {
    let g0 = &gamma.g[0];
    let (dx, dy) = plane_gradient(g0)?;
    let div = |d: &PlaneField| plane_psi(g0, d);
    Ok([div(&dx)?, div(&dy)?, div(&gamma.dz_bar)?])
}

/// Backscatter data: measured values on `Gamma`, the incident wave
/// `exp(i k z)` on every other face. The tail traces there are those of the
/// incident wave, `(0, 0, i k_bar)`.
pub fn complete_boundary_data(gamma: &GammaData, freqs: &FrequencyGrid, grid: &Grid3) -> Result<BoundaryData> {
    check_gamma(gamma, freqs, grid)?;
    let index = BoundaryIndex::new(*grid);
    let on_gamma = |idx: usize| grid.ijk(idx)[2] == 0;
    let g = (0..=freqs.n())
        .map(|n| {
            let k = freqs.k(n);
            let values = index
                .nodes()
                .iter()
                .map(|&idx| {
                    let [i, j, _] = grid.ijk(idx);
                    if on_gamma(idx) {
                        gamma.g[n].at(i, j)
                    } else {
                        C64::from_polar(1.0, k * grid.node_at(idx)[2])
                    }
                })
                .collect();
            BoundaryTrace::new(index.clone(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    let lg = gamma_log_gradient(gamma)?;
    let kbar = freqs.k_bar();
    let tail = [0, 1, 2].map(|a| {
        let far = if a == 2 { I * kbar } else { ZERO };
        trace_with_gamma(&index, grid, &lg[a], |_| far)
    });
    let mut measured = [false; 6];
    measured[Face::ZMin.ordinal()] = true;
    BoundaryData::new(*freqs, g, tail, measured)
}

fn trace_with_gamma(index: &Arc<BoundaryIndex>, grid: &Grid3, gamma: &PlaneField, mut other: impl FnMut(usize) -> C64) -> BoundaryTrace {
    let values = index
        .nodes()
        .iter()
        .map(|&idx| {
            let [i, j, k] = grid.ijk(idx);
            if k == 0 {
                gamma.at(i, j)
            } else {
                other(idx)
            }
        })
        .collect();
    BoundaryTrace::new(index.clone(), values).expect("finite face data")
}

/// Complete data: exact total fields on `boundary minus Gamma` (from the
/// forward solutions `fields[n]` at `k_n`) and propagated data on `Gamma`.
pub fn full_boundary_data(fields: &[ScalarField3], gamma: &GammaData, freqs: &FrequencyGrid) -> Result<BoundaryData> {
    if fields.len() != freqs.n() + 1 {
        return Err(Error::invalid("one forward field per wavenumber is required"));
    }
    let grid = *fields[0].grid();
    check_gamma(gamma, freqs, &grid)?;
    let index = BoundaryIndex::new(grid);
    let g = fields
        .iter()
        .zip(&gamma.g)
        .map(|(f, gg)| {
            f.grid().ensure_matches(&grid, "forward field")?;
            Ok(trace_with_gamma(&index, &grid, gg, |idx| f.values()[idx]))
        })
        .collect::<Result<Vec<_>>>()?;
    let (lg_exact, floored) = log_gradient(&fields[0], freqs.k_bar(), DATA_FLOOR)?;
    if floored > 0 {
        return Err(Error::Stage { stage: "boundary data", message: format!("|u| below floor at {floored} nodes") });
    }
    let lg = gamma_log_gradient(gamma)?;
    let tail = [0, 1, 2].map(|a| trace_with_gamma(&index, &grid, &lg[a], |idx| lg_exact.values()[idx][a]));
    BoundaryData::new(*freqs, g, tail, [true; 6])
}
