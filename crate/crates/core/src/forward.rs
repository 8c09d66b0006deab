//! Lippmann-Schwinger forward solver and synthetic measurements.
//!
//! The volume integral `k^2 int Phi(x, y) beta(y) u(y) dy` is discretised by a
//! Nystrom rule on the grid nodes: off-diagonal weights `k^2 h^3 Phi(|x - y|)`
//! and a corrected self weight that integrates the `1/r` singularity of the
//! node's own cell. The resulting discrete convolution is a Toeplitz product,
//! evaluated exactly by zero-padded FFTs.

use crate::coefficient::CoefficientField;
use crate::error::{Error, Result};
use crate::fft::{smooth_len, Fft3};
use crate::field::{ScalarField3, C64, ZERO};
use crate::freq::FrequencyGrid;
use crate::grid::Grid3;
use crate::krylov::{gmres_plain, GmresOptions};
use crate::measurement::MeasurementSet;
use crate::plane::{PlaneField, PlaneGrid};
use std::f64::consts::PI;

/// Limit of `h * sum_{n != 0} 1/|n|` minus the integral of `1/|x|` over the
/// lattice, i.e. the correction that turns the punctured trapezoid sum of
/// `1/r` over a unit lattice into the exact integral.
pub const SELF_WEIGHT_CONSTANT: f64 = 2.837_297_479_480_6;

/// The outgoing free-space Green's function `exp(i k r) / (4 pi r)`.
pub fn green_kernel(r: f64, k: f64) -> Result<C64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("green_kernel needs r > 0, got {r}")));
    }
    Ok(C64::from_polar(1.0 / (4.0 * PI * r), k * r))
}

/// Quadrature weight coupling two nodes `d` lattice steps apart, including the
/// `k^2` factor.
pub fn ls_weight(d: [i64; 3], h: f64, k: f64) -> C64 {
    let k2 = k * k;
    if d == [0, 0, 0] {
        k2 / (4.0 * PI) * C64::new(h * h * SELF_WEIGHT_CONSTANT, k * h * h * h)
    } else {
        let r = h * ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt();
        C64::from_polar(k2 * h * h * h / (4.0 * PI * r), k * r)
    }
}

/// A rectangular block of grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexBox {
    pub start: [usize; 3],
    pub dims: [usize; 3],
}

impl IndexBox {
    pub fn full(grid: &Grid3) -> Self {
        Self { start: [0; 3], dims: grid.dims }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest box holding every node where `f` is non-zero, or `None`.
    pub fn support(f: &ScalarField3) -> Option<Self> {
        let g = f.grid();
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        for (idx, v) in f.values().iter().enumerate() {
            if *v != ZERO {
                let p = g.ijk(idx);
                for a in 0..3 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
        }
        (lo[0] != usize::MAX).then(|| Self { start: lo, dims: [0, 1, 2].map(|a| hi[a] - lo[a] + 1) })
    }

    /// Copy the box out of a full-grid array.
    pub fn extract(&self, grid: &Grid3, values: &[C64]) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                let row = grid.index(self.start[0], self.start[1] + j, self.start[2] + k);
                out.extend_from_slice(&values[row..row + self.dims[0]]);
            }
        }
        out
    }

    /// Write box values back into a full-grid array.
    pub fn insert(&self, grid: &Grid3, values: &mut [C64], boxed: &[C64]) {
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                let row = grid.index(self.start[0], self.start[1] + j, self.start[2] + k);
                let src = (k * self.dims[1] + j) * self.dims[0];
                values[row..row + self.dims[0]].copy_from_slice(&boxed[src..src + self.dims[0]]);
            }
        }
    }
}

/// FFT evaluation of `out[t] = sum_s w(offset + t - s) src[s]` between two
/// node blocks of the same lattice.
pub struct ConvolutionPlan {
    src_dims: [usize; 3],
    tgt_dims: [usize; 3],
    fft: Fft3,
    kernel_hat: Vec<C64>,
}

impl ConvolutionPlan {
    /// `offset` is the lattice displacement from the source block origin to the
    /// target block origin; `pad` must be at least `src + tgt - 1` per axis.
    pub fn new(h: f64, k: f64, src_dims: [usize; 3], tgt_dims: [usize; 3], offset: [i64; 3], pad: [usize; 3]) -> Self {
        for a in 0..3 {
            assert!(pad[a] + 1 >= src_dims[a] + tgt_dims[a], "padding too small for a linear convolution");
        }
        let fft = Fft3::new(pad);
        let mut kernel = vec![ZERO; fft.len()];
        let range = |a: usize| -(src_dims[a] as i64 - 1)..=(tgt_dims[a] as i64 - 1);
        let wrap = |m: i64, a: usize| m.rem_euclid(pad[a] as i64) as usize;
        for mz in range(2) {
            for my in range(1) {
                for mx in range(0) {
                    let d = [offset[0] + mx, offset[1] + my, offset[2] + mz];
                    let at = wrap(mx, 0) + pad[0] * (wrap(my, 1) + pad[1] * wrap(mz, 2));
                    kernel[at] = ls_weight(d, h, k);
                }
            }
        }
        fft.forward(&mut kernel);
        Self { src_dims, tgt_dims, fft, kernel_hat: kernel }
    }

    pub fn padded_dims(&self) -> [usize; 3] {
        self.fft.dims()
    }

    pub fn spectral_values(&self) -> &[C64] {
        &self.kernel_hat
    }

    pub fn apply(&self, src: &[C64]) -> Vec<C64> {
        let [sx, sy, sz] = self.src_dims;
        let [px, py, _] = self.fft.dims();
        assert_eq!(src.len(), sx * sy * sz, "convolution source has the wrong size");
        let mut buf = vec![ZERO; self.fft.len()];
        for k in 0..sz {
            for j in 0..sy {
                let from = (k * sy + j) * sx;
                let to = (k * py + j) * px;
                buf[to..to + sx].copy_from_slice(&src[from..from + sx]);
            }
        }
        self.fft.forward(&mut buf);
        for (b, w) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= w;
        }
        self.fft.inverse(&mut buf);
        let [tx, ty, tz] = self.tgt_dims;
        let mut out = Vec::with_capacity(tx * ty * tz);
        for k in 0..tz {
            for j in 0..ty {
                let from = (k * py + j) * px;
                out.extend_from_slice(&buf[from..from + tx]);
            }
        }
        out
    }
}

fn ensure_uniform(grid: &Grid3) -> Result<f64> {
    if !grid.is_isotropic(1e-12) {
        return Err(Error::invalid(format!("integral operator needs equal spacing per axis, got {:?}", grid.spacing)));
    }
    Ok(grid.spacing[0])
}

/// The discrete kernel `k^2 Phi` on a grid, stored by its padded spectrum.
pub struct PeriodizedKernel {
    grid: Grid3,
    k: f64,
    plan: ConvolutionPlan,
}

/// Kernel with the default padding (at least twice the grid per axis).
pub fn assemble_periodized_kernel(grid: &Grid3, k: f64) -> Result<PeriodizedKernel> {
    PeriodizedKernel::with_padding(grid, k, 2)
}

impl PeriodizedKernel {
    /// Padded length per axis is the smallest FFT-friendly size `>= factor * n`.
    pub fn with_padding(grid: &Grid3, k: f64, factor: usize) -> Result<Self> {
        let h = ensure_uniform(grid)?;
        if factor < 2 {
            return Err(Error::invalid("padding factor must be at least 2"));
        }
        let pad = grid.dims.map(|n| smooth_len(factor * n));
        let plan = ConvolutionPlan::new(h, k, grid.dims, grid.dims, [0; 3], pad);
        Ok(Self { grid: *grid, k, plan })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn padded_dims(&self) -> [usize; 3] {
        self.plan.padded_dims()
    }

    pub fn spectral_values(&self) -> &[C64] {
        self.plan.spectral_values()
    }
}

/// `(K u)(x) = k^2 int Phi(x, y) beta_hat(y) u(y) dy` at every grid node.
pub fn apply_ls_operator(u: &ScalarField3, beta_hat: &ScalarField3, kernel: &PeriodizedKernel) -> Result<ScalarField3> {
    kernel.grid.ensure_matches(u.grid(), "apply_ls_operator")?;
    kernel.grid.ensure_matches(beta_hat.grid(), "apply_ls_operator")?;
    let src: Vec<C64> = u.values().iter().zip(beta_hat.values()).map(|(a, b)| a * b).collect();
    Ok(ScalarField3::from_vec_unchecked(kernel.grid, kernel.plan.apply(&src)))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for LsOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 500, restart: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct LsSolution {
    /// Total field on the whole grid.
    pub u: ScalarField3,
    pub iterations: usize,
    /// Relative residual `||u - u0 - K u|| / ||u0||` over the grid.
    pub residual: f64,
}

/// Solve `(I - K) u = exp(i k x3)` on `grid`.
///
/// Only the nodes in the bounding box of `supp beta_hat` are unknowns of the
/// Krylov iteration; the field elsewhere follows from one application of the
/// operator, so the residual vanishes identically outside that box.
pub fn solve_ls(beta_hat: &ScalarField3, k: f64, grid: &Grid3, opts: &LsOptions) -> Result<LsSolution> {
    grid.ensure_matches(beta_hat.grid(), "solve_ls")?;
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::invalid(format!("solver tolerance must lie in (0, 1), got {}", opts.tol)));
    }
    let h = ensure_uniform(grid)?;
    let u0 = ScalarField3::plane_wave(*grid, k);
    let Some(bx) = IndexBox::support(beta_hat) else {
        return Ok(LsSolution { u: u0, iterations: 0, residual: 0.0 });
    };

    let beta_b = bx.extract(grid, beta_hat.values());
    let rhs = bx.extract(grid, u0.values());
    let pad_b = [0, 1, 2].map(|a| smooth_len(2 * bx.dims[a]));
    let local = ConvolutionPlan::new(h, k, bx.dims, bx.dims, [0; 3], pad_b);
    let out = gmres_plain(
        |x, y| {
            let src: Vec<C64> = x.iter().zip(&beta_b).map(|(a, b)| a * b).collect();
            let kx = local.apply(&src);
            for ((yi, xi), ki) in y.iter_mut().zip(x).zip(kx) {
                *yi = xi - ki;
            }
        },
        &rhs,
        &GmresOptions { tol: opts.tol, max_iter: opts.max_iter, restart: opts.restart },
    );
    let box_norm: f64 = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let full_norm = (grid.len() as f64).sqrt();
    let residual = out.residual * box_norm / full_norm;
    if !out.converged {
        return Err(Error::NotConverged { stage: "lippmann-schwinger", iterations: out.iterations, residual });
    }

    let src: Vec<C64> = out.x.iter().zip(&beta_b).map(|(a, b)| a * b).collect();
    let offset = bx.start.map(|s| -(s as i64));
    let pad = [0, 1, 2].map(|a| smooth_len(grid.dims[a] + bx.dims[a] - 1));
    let spread = ConvolutionPlan::new(h, k, bx.dims, grid.dims, offset, pad);
    let mut values = u0.into_values();
    for (v, s) in values.iter_mut().zip(spread.apply(&src)) {
        *v += s;
    }
    bx.insert(grid, &mut values, &out.x);
    let u = ScalarField3::new(*grid, values).map_err(|e| e.at_stage("lippmann-schwinger"))?;
    Ok(LsSolution { u, iterations: out.iterations, residual })
}

/// Evaluate the total field at points outside the grid box by direct midpoint
/// quadrature of the integral over the grid cells.
pub fn evaluate_exterior(u: &ScalarField3, beta_hat: &ScalarField3, k: f64, points: &[[f64; 3]]) -> Result<Vec<C64>> {
    let grid = *u.grid();
    grid.ensure_matches(beta_hat.grid(), "evaluate_exterior")?;
    let bbox = grid.bounding_box();
    if let Some(p) = points.iter().find(|p| bbox.contains_closed(**p)) {
        return Err(Error::invalid(format!("evaluation point {p:?} is not outside the domain")));
    }
    let dv = grid.cell_volume();
    let sources: Vec<([f64; 3], C64)> = beta_hat
        .values()
        .iter()
        .zip(u.values())
        .enumerate()
        .filter(|(_, (b, _))| **b != ZERO)
        .map(|(idx, (b, uv))| (grid.node_at(idx), k * k * dv * b * uv))
        .collect();
    Ok(points
        .iter()
        .map(|p| {
            let scattered: C64 = sources
                .iter()
                .map(|(y, s)| {
                    let r = ((p[0] - y[0]).powi(2) + (p[1] - y[1]).powi(2) + (p[2] - y[2]).powi(2)).sqrt();
                    s * C64::from_polar(1.0 / (4.0 * PI * r), k * r)
                })
                .sum();
            C64::from_polar(1.0, k * p[2]) + scattered
        })
        .collect())
}

/// Synthetic data together with the full total fields that produced it.
pub struct Simulation {
    pub measurements: MeasurementSet,
    pub fields: Vec<ScalarField3>,
}

/// Solve the forward problem at every `k_n` and sample the total field on
/// `plane`.
pub fn simulate_measurements(c: &CoefficientField, freqs: &FrequencyGrid, plane: &PlaneGrid, opts: &LsOptions) -> Result<MeasurementSet> {
    Ok(simulate(c, freqs, plane, opts)?.measurements)
}

/// As [`simulate_measurements`], also returning the fields on the grid.
pub fn simulate(c: &CoefficientField, freqs: &FrequencyGrid, plane: &PlaneGrid, opts: &LsOptions) -> Result<Simulation> {
    let grid = *c.grid();
    let bbox = grid.bounding_box();
    if plane.z >= bbox.min[2] && plane.z <= bbox.max[2] {
        return Err(Error::invalid(format!("measurement plane z = {} cuts through the domain", plane.z)));
    }
    let beta_hat = c.beta_hat();
    let points: Vec<[f64; 3]> = (0..plane.len()).map(|idx| plane.point(idx)).collect();
    let mut samples = Vec::with_capacity(freqs.n() + 1);
    let mut fields = Vec::with_capacity(freqs.n() + 1);
    for k in freqs.ks() {
        let sol = solve_ls(&beta_hat, k, &grid, opts).map_err(|e| e.at_stage("simulate"))?;
        log::debug!("k = {k}: {} iterations, residual {:.2e}", sol.iterations, sol.residual);
        let g = evaluate_exterior(&sol.u, &beta_hat, k, &points)?;
        samples.push(PlaneField::new(*plane, k, g)?);
        fields.push(sol.u);
    }
    Ok(Simulation { measurements: MeasurementSet::new(*freqs, samples, Some(0.0))?, fields })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{build_coefficient, default_inner_region, Inclusion};
    use crate::grid::Aabb;
    use crate::ops::{l2_norm, relative_l2_error};

    fn cube_grid(n: usize, h: f64) -> Grid3 {
        Grid3::new([-(n as f64 - 1.0) * h / 2.0; 3], [h; 3], [n; 3]).unwrap()
    }

    fn bumpy_beta(g: Grid3) -> ScalarField3 {
        ScalarField3::from_fn(g, |x| C64::new(1.0 + x[0] - 0.5 * x[1] * x[2], 0.3 * x[2]))
    }

    /// Independent O(n^2) evaluation of the same quadrature rule.
    fn dense_apply(u: &ScalarField3, beta: &ScalarField3, k: f64) -> Vec<C64> {
        let g = *u.grid();
        let h = g.spacing[0];
        let mut out = vec![ZERO; g.len()];
        for (t, o) in out.iter_mut().enumerate() {
            let x = g.node_at(t);
            for s in 0..g.len() {
                let y = g.node_at(s);
                let w = if s == t {
                    k * k / (4.0 * PI) * (h * h * SELF_WEIGHT_CONSTANT + C64::new(0.0, k * h.powi(3)))
                } else {
                    let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
                    k * k * h.powi(3) * C64::new((k * r).cos(), (k * r).sin()) / (4.0 * PI * r)
                };
                *o += w * beta.values()[s] * u.values()[s];
            }
        }
        out
    }

    #[test]
    fn green_kernel_values() {
        assert!((green_kernel(1.0, 0.0).unwrap() - C64::new(1.0 / (4.0 * PI), 0.0)).norm() < 1e-16);
        let v = green_kernel(1.0, 2.3).unwrap();
        assert!((v - C64::new(2.3f64.cos(), 2.3f64.sin()) / (4.0 * PI)).norm() < 1e-16);
        // cos(3.35) and sin(3.35) from an independent evaluation.
        let v = green_kernel(0.5, 6.7).unwrap();
        assert!((v.re - (-0.978_361_678_581_934_1 / (2.0 * PI))).abs() < 1e-12, "{v}");
        assert!((v.im - (-0.206_901_971_673_399_8 / (2.0 * PI))).abs() < 1e-12, "{v}");
        assert!(green_kernel(0.0, 1.0).is_err());
        assert!(green_kernel(-1.0, 1.0).is_err());
    }

    #[test]
    fn kernel_is_reciprocal() {
        for d in [[1, 2, -3], [0, 0, 1], [4, -1, 2]] {
            let neg = d.map(|v: i64| -v);
            assert_eq!(ls_weight(d, 0.1, 6.7), ls_weight(neg, 0.1, 6.7));
        }
    }

    #[test]
    fn self_weight_constant_reproduces_singular_integral() {
        // The punctured lattice sum of 1/r over [-L, L]^3 plus the correction
        // must approach the exact integral of 1/r over the cube.
        // Integral of 1/r over [-1, 1]^3 (eight unit-cube octants).
        let s3 = 3f64.sqrt();
        let exact_unit = 8.0 * (1.5 * ((s3 + 1.0) / (s3 - 1.0)).ln() - PI / 4.0);
        let sum = |m: i64| {
            let h = 1.0 / m as f64;
            let mut s = 0.0;
            for i in -m..=m {
                for j in -m..=m {
                    for k in -m..=m {
                        if (i, j, k) == (0, 0, 0) {
                            continue;
                        }
                        let w = [i, j, k].iter().map(|&p| if p.abs() == m { 0.5 } else { 1.0 }).product::<f64>();
                        s += w * h.powi(3) / (h * ((i * i + j * j + k * k) as f64).sqrt());
                    }
                }
            }
            s + h * h * SELF_WEIGHT_CONSTANT
        };
        let e1 = (sum(10) - exact_unit).abs();
        let e2 = (sum(20) - exact_unit).abs();
        assert!(e2 < e1 && e2 < 2e-2, "{e1} {e2} {exact_unit}");
    }

    #[test]
    fn fft_operator_matches_dense_sum() {
        let g = cube_grid(8, 0.1);
        let beta = bumpy_beta(g);
        let u = ScalarField3::from_fn(g, |x| C64::from_polar(1.0 + x[1], 6.7 * x[2] - x[0]));
        let k = 6.7;
        let fast = apply_ls_operator(&u, &beta, &assemble_periodized_kernel(&g, k).unwrap()).unwrap();
        let slow = dense_apply(&u, &beta, k);
        let oracle = ScalarField3::new(g, slow).unwrap();
        assert!(relative_l2_error(&fast, &oracle).unwrap() < 1e-12);
    }

    #[test]
    fn padding_does_not_change_result() {
        let g = Grid3::new([0.0; 3], [0.1; 3], [7, 9, 6]).unwrap();
        let beta = bumpy_beta(g);
        let u = ScalarField3::from_fn(g, |x| C64::new(x[0].cos(), x[2]));
        let a = apply_ls_operator(&u, &beta, &PeriodizedKernel::with_padding(&g, 6.2, 2).unwrap()).unwrap();
        let b = apply_ls_operator(&u, &beta, &PeriodizedKernel::with_padding(&g, 6.2, 4).unwrap()).unwrap();
        assert!(relative_l2_error(&a, &b).unwrap() < 1e-12);
        let k = PeriodizedKernel::with_padding(&g, 6.2, 2).unwrap();
        for a in 0..3 {
            assert!(k.padded_dims()[a] >= 2 * g.dims[a]);
        }
    }

    #[test]
    fn zero_inputs_give_zero() {
        let g = cube_grid(6, 0.1);
        let kern = assemble_periodized_kernel(&g, 6.7).unwrap();
        let u = ScalarField3::constant(g, C64::new(1.0, 2.0));
        assert_eq!(apply_ls_operator(&u, &ScalarField3::zeros(g), &kern).unwrap().max_abs(), 0.0);
        assert_eq!(apply_ls_operator(&ScalarField3::zeros(g), &bumpy_beta(g), &kern).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn anisotropic_grid_is_rejected() {
        let g = Grid3::new([0.0; 3], [0.1, 0.1, 0.2], [4, 4, 4]).unwrap();
        assert!(assemble_periodized_kernel(&g, 6.7).is_err());
    }

    #[test]
    fn operator_is_linear_in_u_and_beta() {
        let g = cube_grid(6, 0.1);
        let kern = assemble_periodized_kernel(&g, 6.5).unwrap();
        let b1 = bumpy_beta(g);
        let b2 = ScalarField3::from_fn(g, |x| C64::new(x[1] * x[1], -x[0]));
        let u1 = ScalarField3::from_fn(g, |x| C64::new(x[2], 1.0));
        let u2 = ScalarField3::from_fn(g, |x| C64::new(1.0, x[0] * x[1]));
        let a = C64::new(0.3, -1.2);
        let mut lhs_u = u1.scale(a);
        lhs_u.axpy(C64::new(1.0, 0.0), &u2).unwrap();
        let lhs = apply_ls_operator(&lhs_u, &b1, &kern).unwrap();
        let mut rhs = apply_ls_operator(&u1, &b1, &kern).unwrap().scale(a);
        rhs.axpy(C64::new(1.0, 0.0), &apply_ls_operator(&u2, &b1, &kern).unwrap()).unwrap();
        assert!(relative_l2_error(&lhs, &rhs).unwrap() < 1e-12);
        let lhs = apply_ls_operator(&u1, &b1.add(&b2).unwrap(), &kern).unwrap();
        let rhs = apply_ls_operator(&u1, &b1, &kern).unwrap().add(&apply_ls_operator(&u1, &b2, &kern).unwrap()).unwrap();
        assert!(relative_l2_error(&lhs, &rhs).unwrap() < 1e-12);
    }

    #[test]
    fn homogeneous_solve_is_plane_wave() {
        let g = cube_grid(10, 0.1);
        let sol = solve_ls(&ScalarField3::zeros(g), 6.7, &g, &LsOptions::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.u, ScalarField3::plane_wave(g, 6.7));
    }

    #[test]
    fn solve_satisfies_the_equation_on_the_whole_grid() {
        let g = cube_grid(14, 0.1);
        let beta = ScalarField3::from_fn(g, |x| {
            if x[0].abs() < 0.25 && x[1].abs() < 0.2 && x[2].abs() < 0.3 {
                C64::new(2.0, 0.0)
            } else {
                ZERO
            }
        });
        let opts = LsOptions { tol: 1e-10, ..Default::default() };
        let sol = solve_ls(&beta, 6.7, &g, &opts).unwrap();
        let ku = apply_ls_operator(&sol.u, &beta, &assemble_periodized_kernel(&g, 6.7).unwrap()).unwrap();
        let u0 = ScalarField3::plane_wave(g, 6.7);
        let r = sol.u.sub(&u0).unwrap().sub(&ku).unwrap();
        assert!(l2_norm(&r) / l2_norm(&u0) < 1e-9);
    }

    #[test]
    fn exterior_field_decays_and_is_symmetric() {
        let g = cube_grid(9, 0.1);
        let beta = ScalarField3::from_fn(g, |x| if x.iter().all(|v| v.abs() < 0.15) { C64::new(1.0, 0.0) } else { ZERO });
        let k = 6.7;
        let sol = solve_ls(&beta, k, &g, &LsOptions { tol: 1e-10, ..Default::default() }).unwrap();
        let pts = [[100.0, 0.0, 0.0], [200.0, 0.0, 0.0], [0.7, 0.3, -1.0], [-0.7, 0.3, -1.0]];
        let vals = evaluate_exterior(&sol.u, &beta, k, &pts).unwrap();
        let sc = |i: usize| vals[i] - C64::from_polar(1.0, k * pts[i][2]);
        let ratio = sc(0).norm() / sc(1).norm();
        assert!((ratio - 2.0).abs() < 1e-3, "{ratio}");
        assert!((sc(2) - sc(3)).norm() < 1e-10 * sc(2).norm());
        assert!(evaluate_exterior(&sol.u, &beta, k, &[[0.0, 0.0, 0.0]]).is_err());
        let free = evaluate_exterior(&sol.u, &ScalarField3::zeros(g), k, &pts[..1]).unwrap();
        assert_eq!(free[0], C64::from_polar(1.0, k * pts[0][2]));
    }

    #[test]
    fn homogeneous_measurements_are_incident_wave() {
        let g = Grid3::covering(&Aabb::default_domain(), 0.25).unwrap();
        let c = build_coefficient(&[], &g, &default_inner_region(&g)).unwrap();
        let f = FrequencyGrid::new(6.7, 6.2, 2).unwrap();
        let plane = PlaneGrid::cell_centred(-7.6, (-5.0, 5.0), (-5.0, 5.0), 8, 8).unwrap();
        let m = simulate_measurements(&c, &f, &plane, &LsOptions::default()).unwrap();
        for s in m.samples() {
            let e = C64::from_polar(1.0, s.k() * -7.6);
            assert!(s.values().iter().all(|v| (v - e).norm() < 1e-15));
        }
        let _ = Inclusion::new(Aabb::default_domain(), 1.0);
    }
}
