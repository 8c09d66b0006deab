//! Frequency-marching reconstruction of the coefficient.
//!
//! Starting from an initial tail at the top wavenumber, each outer step
//! solves a Dirichlet problem for `q_n`, recovers `c` from the updated
//! gradient of `v`, truncates and smooths it, and refreshes the tail with a
//! forward solve at `k_bar`.

use crate::coefficient::{cutoff, default_inner_region};
use crate::elliptic::{solve_dirichlet_full, solve_laplace_component, EllipticOptions};
use crate::error::{Error, Result};
use crate::field::{RealField3, ScalarField3, VectorField3, C64, I, ZERO};
use crate::forward::{solve_ls, LsOptions};
use crate::grid::{Aabb, Grid3};
use crate::ops::{gradient, laplacian, log_gradient, relative_l2_error_real};
use crate::preprocess::{BoundaryData, TargetRegion, DATA_FLOOR};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Derivatives of the tail function `V`.
#[derive(Debug, Clone)]
pub struct TailState {
    pub grad_v: VectorField3,
    pub lap_v: ScalarField3,
}

impl TailState {
    /// Tail of the incident wave, `grad V = (0, 0, i k)`, `Delta V = 0`.
    pub fn incident(grid: Grid3, k: f64) -> Self {
        Self { grad_v: VectorField3::constant(grid, [ZERO, ZERO, I * k]), lap_v: ScalarField3::zeros(grid) }
    }
}

/// Which previous `q` enters the linearised source term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrevQ {
    /// The latest inner iterate `q_{n,i-1}`.
    InnerIterate,
    /// The converged `q_{n-1}` of the previous outer step.
    #[default]
    PreviousOuter,
}

/// Gradient of `q_0` used as the previous `q` at `n = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialQ {
    /// `q_0 = 0`.
    Zero,
    /// `grad q_0 = grad V_0 / k_bar`, the high-frequency limit of `d_k v`.
    #[default]
    FromTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcmOptions {
    pub inner_max: usize,
    pub inner_min: usize,
    pub inner_tol: f64,
    pub outer_tol: f64,
    /// Consecutive entries of the two-step error sequence that must pass.
    pub outer_run: usize,
    pub prev_q: PrevQ,
    pub initial_q: InitialQ,
    /// Standard deviation of the smoothing kernel, in grid cells.
    pub smoothing_sigma: f64,
    pub elliptic: EllipticOptions,
    pub ls: LsOptions,
}

impl Default for GcmOptions {
    fn default() -> Self {
        Self {
            inner_max: 3,
            inner_min: 2,
            inner_tol: 1e-6,
            outer_tol: 5e-4,
            outer_run: 3,
            prev_q: PrevQ::default(),
            initial_q: InitialQ::default(),
            smoothing_sigma: 0.65,
            elliptic: EllipticOptions::default(),
            ls: LsOptions::default(),
        }
    }
}

/// Mutable state of the marching scheme.
#[derive(Debug, Clone)]
pub struct IterateState {
    pub n: usize,
    pub i: usize,
    /// `q_1 .. q_n` of the completed outer steps.
    pub q_fields: Vec<ScalarField3>,
    /// `Q_{n-1}`, the sum of the stored `q`.
    pub big_q: ScalarField3,
    /// Gradient of the `q` entering the source term.
    pub prev_q_grad: VectorField3,
    pub c_current: RealField3,
    pub tail: TailState,
    pub error_log: Vec<f64>,
}

/// Harmonic extensions of the boundary traces of `grad u / u` at `k_bar`.
pub fn initial_tail(data: &BoundaryData, opts: &EllipticOptions) -> Result<TailState> {
    let traces = data.tail_traces();
    let mut comps = Vec::with_capacity(3);
    for t in traces {
        comps.push(solve_laplace_component(t, opts).map_err(|e| e.at_stage("initial tail"))?);
    }
    let grad_v = VectorField3::from_components([&comps[0], &comps[1], &comps[2]])?;
    Ok(TailState { grad_v, lap_v: ScalarField3::zeros(*data.grid()) })
}

/// `c = -(Delta v + grad v . grad v) / k^2`.
pub fn coefficient_from_v(grad_v: &VectorField3, lap_v: &ScalarField3, k: f64) -> Result<ScalarField3> {
    if !(k > 1.0) {
        return Err(Error::invalid(format!("wavenumber must exceed 1, got {k}")));
    }
    let sq = grad_v.dot(grad_v)?;
    let c = lap_v.zip_map(&sq, |l, s| -(l + s) / (k * k))?;
    if !c.is_finite() {
        return Err(Error::NonFinite { what: "coefficient", index: 0 });
    }
    Ok(c)
}

/// Solve `Delta q - 2h grad Q . grad q = F / k_n` with `q = psi_n` on the
/// boundary, where
/// `F = -2 k_n grad V . grad q_prev + 2 Delta(-hQ + V) + 2 (grad(-hQ + V))^2`.
/// Returns the solution and the Krylov iteration count.
pub fn qn_solve(
    state: &IterateState,
    psi_n: &crate::boundary::BoundaryTrace,
    k_n: f64,
    h: f64,
    opts: &EllipticOptions,
) -> Result<(ScalarField3, usize)> {
    let grid = *state.big_q.grid();
    let grad_q = gradient(&state.big_q)?;
    let lap_q = laplacian(&state.big_q)?;
    let tail = &state.tail;
    let mut f = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let gv = tail.grad_v.values()[idx];
        let gp = state.prev_q_grad.values()[idx];
        let gq = grad_q.values()[idx];
        let w = [0, 1, 2].map(|a| gv[a] - h * gq[a]);
        let drift: C64 = (0..3).map(|a| gv[a] * gp[a]).sum();
        let sq: C64 = w.iter().map(|x| x * x).sum();
        let lap = tail.lap_v.values()[idx] - h * lap_q.values()[idx];
        f.push((-2.0 * k_n * drift + 2.0 * lap + 2.0 * sq) / k_n);
    }
    let f = ScalarField3::new(grid, f).map_err(|e| e.at_stage("q source"))?;
    let p = grad_q.scale(C64::new(2.0 * h, 0.0));
    let sol = solve_dirichlet_full(Some(&p), &f, psi_n, opts).map_err(|e| e.at_stage("q solve"))?;
    Ok((sol.w, sol.iterations))
}

/// `grad v = -h (grad q + grad Q) + grad V` and
/// `Delta v = -h (Delta q + Delta Q) + Delta V`.
pub fn update_v_gradient(q: &ScalarField3, big_q: &ScalarField3, tail: &TailState, h: f64) -> Result<(VectorField3, ScalarField3)> {
    q.grid().ensure_matches(big_q.grid(), "update_v_gradient")?;
    q.grid().ensure_matches(tail.grad_v.grid(), "update_v_gradient")?;
    let s = q.add(big_q)?;
    let gs = gradient(&s)?;
    let ls = laplacian(&s)?;
    let m = C64::new(-h, 0.0);
    let grad_v = gs.scale(m).add(&tail.grad_v)?;
    let lap_v = ls.scale(m).add(&tail.lap_v)?;
    Ok((grad_v, lap_v))
}

/// Mask of nodes inside the target region (footprint times depth range).
pub fn region_mask(region: &TargetRegion, grid: &Grid3) -> Vec<bool> {
    (0..grid.len()).map(|idx| region.component_containing(grid.node_at(idx)).is_some()).collect()
}

fn gaussian_weights(sigma: f64) -> [f64; 3] {
    let e = (-1.0 / (2.0 * sigma * sigma)).exp();
    let s = 1.0 + 2.0 * e;
    [e / s, 1.0 / s, e / s]
}

/// Separable 3x3x3 Gaussian filter with replicated edges.
pub fn smooth3(f: &RealField3, sigma: f64) -> RealField3 {
    let grid = *f.grid();
    let w = gaussian_weights(sigma);
    let mut cur = f.values().to_vec();
    let mut next = vec![0.0; cur.len()];
    for axis in 0..3 {
        let n = grid.dims[axis];
        let stride = match axis {
            0 => 1,
            1 => grid.dims[0],
            _ => grid.dims[0] * grid.dims[1],
        };
        for idx in 0..cur.len() {
            let p = grid.ijk(idx)[axis];
            let lo = if p > 0 { idx - stride } else { idx };
            let hi = if p + 1 < n { idx + stride } else { idx };
            next[idx] = w[0] * cur[lo] + w[1] * cur[idx] + w[2] * cur[hi];
        }
        std::mem::swap(&mut cur, &mut next);
    }
    RealField3::new(grid, cur).expect("finite smoothing")
}

/// `max(|c|, 1)` on the target region and 1 elsewhere, smoothed, clamped
/// below by 1 and reset to 1 outside the region.
pub fn truncate_and_smooth(c_raw: &ScalarField3, region: &TargetRegion, sigma: f64) -> RealField3 {
    let grid = *c_raw.grid();
    let mask = region_mask(region, &grid);
    truncate_with_mask(c_raw, &mask, sigma)
}

fn truncate_with_mask(c_raw: &ScalarField3, mask: &[bool], sigma: f64) -> RealField3 {
    let grid = *c_raw.grid();
    let cut: Vec<f64> = c_raw.values().iter().zip(mask).map(|(c, &m)| if m { c.norm().max(1.0) } else { 1.0 }).collect();
    let mut out = smooth3(&RealField3::new(grid, cut).expect("finite coefficient"), sigma);
    for (v, &m) in out.values_mut().iter_mut().zip(mask) {
        *v = if m { v.max(1.0) } else { 1.0 };
    }
    out
}

/// Forward solve at `k_bar` for `beta_hat = chi (c - 1)`, then
/// `grad V = grad u / u` and `Delta V = -k_bar^2 c_hat - grad V . grad V`
/// with `c_hat = 1 + chi (c - 1)`. Returns the tail and the LS iteration count.
pub fn update_tail(c: &RealField3, chi: &RealField3, k_bar: f64, opts: &LsOptions) -> Result<(TailState, usize)> {
    let grid = *c.grid();
    grid.ensure_matches(chi.grid(), "update_tail")?;
    if c.min() < 1.0 {
        return Err(Error::invalid("update_tail needs c >= 1"));
    }
    let c_hat: Vec<f64> = c.values().iter().zip(chi.values()).map(|(&c, &x)| 1.0 + x * (c - 1.0)).collect();
    let beta = ScalarField3::new(grid, c_hat.iter().map(|&v| C64::new(v - 1.0, 0.0)).collect())?;
    let sol = solve_ls(&beta, k_bar, &grid, opts).map_err(|e| e.at_stage("tail update"))?;
    let (grad_v, floored) = log_gradient(&sol.u, k_bar, DATA_FLOOR)?;
    if floored * 100 > grid.len() {
        return Err(Error::Stage {
            stage: "tail update",
            message: format!("|u| fell below {DATA_FLOOR} on {floored} of {} nodes", grid.len()),
        });
    }
    let sq = grad_v.dot(&grad_v)?;
    let lap = sq.values().iter().zip(&c_hat).map(|(s, &ch)| -k_bar * k_bar * ch - s).collect();
    let lap_v = ScalarField3::new(grid, lap).map_err(|e| e.at_stage("tail update"))?;
    Ok((TailState { grad_v, lap_v }, sol.iterations))
}

/// `||c_new - c_old|| / ||c_old||`.
pub fn inner_error(c_new: &RealField3, c_old: &RealField3) -> Result<f64> {
    relative_l2_error_real(c_new, c_old)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerRecord {
    pub i: usize,
    /// `e_{n,i}` for `i >= 2`.
    pub error: Option<f64>,
    pub q_iterations: usize,
    pub ls_iterations: usize,
    pub c_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub n: usize,
    pub k: f64,
    /// Relative change between `c_{n,1}` and the last iterate of step `n - 1`.
    pub bridge_error: Option<f64>,
    pub inner: Vec<InnerRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The two-step error sequence met the outer tolerance.
    Converged,
    /// All wavenumbers were used without meeting it.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimate {
    pub component: usize,
    pub c_max: f64,
    pub argmax: [f64; 3],
    /// Centroid of the nodes with `c >= c_max / 2` in the component.
    pub centroid: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub c_comp: RealField3,
    pub targets: Vec<TargetEstimate>,
    pub c0_max: f64,
    pub log: Vec<OuterRecord>,
    pub stop: StopReason,
    /// `(n, i)` of the iterates averaged into `c_comp`.
    pub averaged: Vec<(usize, usize)>,
    pub options: GcmOptions,
    pub seconds: f64,
}

impl ReconstructionResult {
    pub fn outer_iterations(&self) -> usize {
        self.log.len()
    }

    pub fn c_max(&self) -> f64 {
        self.c_comp.max()
    }
}

/// Per-component maxima and centroids of `c` over `region`.
pub fn target_estimates(c: &RealField3, region: &TargetRegion) -> Vec<TargetEstimate> {
    let grid = *c.grid();
    let owner: Vec<Option<usize>> = (0..grid.len()).map(|idx| region.component_containing(grid.node_at(idx))).collect();
    (0..region.components.len())
        .map(|comp| {
            let nodes: Vec<usize> = (0..grid.len()).filter(|&idx| owner[idx] == Some(comp)).collect();
            let (mut c_max, mut arg) = (1.0, None);
            for &idx in &nodes {
                if c.values()[idx] > c_max || arg.is_none() {
                    c_max = c.values()[idx].max(c_max);
                    if c.values()[idx] >= c_max {
                        arg = Some(idx);
                    }
                }
            }
            let argmax = arg.map(|idx| grid.node_at(idx)).unwrap_or([f64::NAN; 3]);
            let hot: Vec<[f64; 3]> =
                nodes.iter().filter(|&&idx| c.values()[idx] >= 0.5 * c_max).map(|&idx| grid.node_at(idx)).collect();
            let centroid = if hot.is_empty() {
                argmax
            } else {
                [0, 1, 2].map(|a| hot.iter().map(|p| p[a]).sum::<f64>() / hot.len() as f64)
            };
            TargetEstimate { component: comp, c_max, argmax, centroid }
        })
        .collect()
}

/// First run of at least `run` consecutive entries `<= tol`, as a range.
fn passing_run(seq: &[f64], tol: f64, run: usize) -> Option<std::ops::Range<usize>> {
    let mut start = 0;
    while start < seq.len() {
        if seq[start] <= tol {
            let mut end = start;
            while end < seq.len() && seq[end] <= tol {
                end += 1;
            }
            if end - start >= run {
                return Some(start..end);
            }
            start = end;
        } else {
            start += 1;
        }
    }
    None
}

/// Run the marching scheme on prepared boundary data.
///
/// `inner_region` bounds the cutoff applied to the contrast in the forward
/// solves; `None` uses the default ramp.
pub fn run_reconstruction(
    data: &BoundaryData,
    region: &TargetRegion,
    inner_region: Option<Aabb>,
    opts: &GcmOptions,
) -> Result<ReconstructionResult> {
    if opts.inner_max < 1 || opts.inner_min < 1 || opts.inner_min > opts.inner_max || opts.outer_run < 1 {
        return Err(Error::invalid("inconsistent inner/outer iteration limits"));
    }
    let start = Instant::now();
    let grid = *data.grid();
    let freqs = *data.freqs();
    let k_bar = freqs.k_bar();
    let h = freqs.h();
    let chi = cutoff(&grid, &inner_region.unwrap_or_else(|| default_inner_region(&grid)))?;
    let mask = region_mask(region, &grid);
    let sigma = opts.smoothing_sigma;

    let tail0 = initial_tail(data, &opts.elliptic)?;
    let c0 = truncate_with_mask(&coefficient_from_v(&tail0.grad_v, &tail0.lap_v, k_bar)?, &mask, sigma);
    let c0_max = c0.max();
    log::info!("initial tail: c0 max {c0_max:.4}");
    let q0_grad = match opts.initial_q {
        InitialQ::Zero => VectorField3::zeros(grid),
        InitialQ::FromTail => tail0.grad_v.scale(C64::new(1.0 / k_bar, 0.0)),
    };

    let mut state = IterateState {
        n: 0,
        i: 0,
        q_fields: Vec::new(),
        big_q: ScalarField3::zeros(grid),
        prev_q_grad: q0_grad,
        c_current: c0,
        tail: tail0,
        error_log: Vec::new(),
    };
    let mut log_records: Vec<OuterRecord> = Vec::new();
    // Per outer step: its iterates and the error attached to each
    // (bridge error for i = 1, e_{n,i} for i >= 2).
    let mut history: Vec<Vec<(RealField3, Option<f64>)>> = Vec::new();
    let mut stop = StopReason::Exhausted;
    let mut averaged = Vec::new();
    let mut c_comp = None;

    for n in 1..=freqs.n() {
        let k_n = freqs.k(n);
        state.n = n;
        let mut iterates: Vec<(RealField3, Option<f64>)> = Vec::new();
        let mut record = OuterRecord { n, k: k_n, bridge_error: None, inner: Vec::new() };
        let mut q_last = None;
        for i in 1..=opts.inner_max {
            state.i = i;
            let (q, q_iters) = qn_solve(&state, data.psi(n), k_n, h, &opts.elliptic)?;
            let (gv, lv) = update_v_gradient(&q, &state.big_q, &state.tail, h)?;
            let c_raw = coefficient_from_v(&gv, &lv, k_n).map_err(|e| e.at_stage("coefficient"))?;
            let c = truncate_with_mask(&c_raw, &mask, sigma);
            let (tail, ls_iters) = update_tail(&c, &chi, k_bar, &opts.ls)?;
            state.tail = tail;
            if opts.prev_q == PrevQ::InnerIterate {
                state.prev_q_grad = gradient(&q)?;
            }
            let error = if i == 1 {
                let prev = history.last().and_then(|h| h.last()).map(|(c, _)| c);
                let e = prev.map(|p| inner_error(&c, p)).transpose()?;
                record.bridge_error = e;
                e
            } else {
                Some(inner_error(&c, &iterates.last().expect("previous iterate").0)?)
            };
            let c_max = c.max();
            log::info!(
                "n = {n} (k = {k_n:.4}), i = {i}: c max {c_max:.4}, error {}, q iters {q_iters}, ls iters {ls_iters}",
                error.map_or("-".to_string(), |e| format!("{e:.3e}"))
            );
            record.inner.push(InnerRecord { i, error: if i >= 2 { error } else { None }, q_iterations: q_iters, ls_iterations: ls_iters, c_max });
            if let Some(e) = error {
                state.error_log.push(e);
            }
            state.c_current = c.clone();
            iterates.push((c, error));
            q_last = Some(q);
            if i >= opts.inner_min && error.is_some_and(|e| e < opts.inner_tol) {
                break;
            }
        }
        let q_n = q_last.expect("at least one inner iteration");
        state.big_q = state.big_q.add(&q_n)?;
        if opts.prev_q == PrevQ::PreviousOuter {
            state.prev_q_grad = gradient(&q_n)?;
        }
        state.q_fields.push(q_n);
        history.push(iterates);
        log_records.push(record);

        if history.len() >= 2 {
            // e_{n-1,2..}, bridge, e_{n,2..}, with the iterate each belongs to.
            let mut seq = Vec::new();
            let m = history.len();
            for (s, step) in history[m - 2..].iter().enumerate() {
                for (i, (_, e)) in step.iter().enumerate() {
                    let first_of_older = s == 0 && i == 0;
                    if let (false, Some(e)) = (first_of_older, e) {
                        seq.push((*e, m - 2 + s, i));
                    }
                }
            }
            let values: Vec<f64> = seq.iter().map(|t| t.0).collect();
            if let Some(range) = passing_run(&values, opts.outer_tol, opts.outer_run) {
                let picked: Vec<(usize, usize)> = seq[range].iter().map(|&(_, s, i)| (s, i)).collect();
                let mut sum = vec![0.0; grid.len()];
                for &(s, i) in &picked {
                    for (a, b) in sum.iter_mut().zip(history[s][i].0.values()) {
                        *a += b;
                    }
                }
                let cnt = picked.len() as f64;
                c_comp = Some(RealField3::new(grid, sum.into_iter().map(|v| v / cnt).collect())?);
                averaged = picked.into_iter().map(|(s, i)| (s + 1, i + 1)).collect();
                stop = StopReason::Converged;
                break;
            }
        }
    }

    let c_comp = match c_comp {
        Some(c) => c,
        None => {
            let last = history.last().and_then(|h| h.last()).map(|(c, _)| c.clone()).expect("at least one outer step");
            averaged = vec![(history.len(), history.last().map_or(0, |h| h.len()))];
            last
        }
    };
    let targets = target_estimates(&c_comp, region);
    Ok(ReconstructionResult {
        c_comp,
        targets,
        c0_max,
        log: log_records,
        stop,
        averaged,
        options: *opts,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{BoundaryIndex, BoundaryTrace};
    use crate::coefficient::build_coefficient;
    use crate::coefficient::Inclusion;
    use crate::freq::FrequencyGrid;
    use crate::plane::PlaneGrid;
    use crate::preprocess::{complete_boundary_data, gamma_plane, GammaData, TargetComponent, TARGET_Z_RANGE};
    use crate::plane::PlaneField;
    use proptest::prelude::*;

    fn grid() -> Grid3 {
        Grid3::covering(&Aabb::default_domain(), 0.25).unwrap()
    }

    fn square_region(half: f64) -> TargetRegion {
        let p = PlaneGrid::cell_centred(-0.75, (-2.5, 2.5), (-2.5, 2.5), 50, 50).unwrap();
        let nodes: Vec<(usize, usize)> = (0..50)
            .flat_map(|j| (0..50).map(move |i| (i, j)))
            .filter(|&(i, j)| p.x(i).abs() < half && p.y(j).abs() < half)
            .collect();
        let comp = TargetComponent { nodes, peak: (25, 25), peak_value: 1.0, center: (0.0, 0.0) };
        TargetRegion::new(p, vec![comp], TARGET_Z_RANGE).unwrap()
    }

    #[test]
    fn coefficient_identities() {
        let g = grid();
        let zero = ScalarField3::zeros(g);
        let one = coefficient_from_v(&VectorField3::constant(g, [ZERO, ZERO, I * 6.7]), &zero, 6.7).unwrap();
        assert!(one.values().iter().all(|v| (v - 1.0).norm() < 1e-14));
        let five = coefficient_from_v(&VectorField3::constant(g, [ZERO, ZERO, I * 6.7 * 5f64.sqrt()]), &zero, 6.7).unwrap();
        assert!(five.values().iter().all(|v| (v - 5.0).norm() < 1e-12));
        assert!(coefficient_from_v(&VectorField3::zeros(g), &zero, 0.5).is_err());
    }

    #[test]
    fn v_update_passthrough_and_chain() {
        let g = grid();
        let tail = TailState::incident(g, 6.7);
        let q = ScalarField3::from_fn(g, |x| I * x[2]);
        let zero = ScalarField3::zeros(g);
        let (gv, lv) = update_v_gradient(&q, &zero, &tail, 0.0).unwrap();
        assert_eq!(gv.values(), tail.grad_v.values());
        assert_eq!(lv.values(), tail.lap_v.values());
        let (gv, lv) = update_v_gradient(&zero, &zero, &tail, 0.3).unwrap();
        assert_eq!(gv.values(), tail.grad_v.values());
        assert!(lv.values().iter().all(|v| v.norm() == 0.0));
        let h = 0.5 / 9.0;
        let (gv, _) = update_v_gradient(&q, &zero, &tail, h).unwrap();
        for v in gv.values() {
            assert!(v[0].norm() < 1e-12 && v[1].norm() < 1e-12);
            assert!((v[2] - I * (6.7 - h)).norm() < 1e-12);
        }
    }

    #[test]
    fn truncation_contract() {
        let g = grid();
        let region = square_region(0.5);
        let ones = ScalarField3::constant(g, C64::new(1.0, 0.0));
        assert!(truncate_and_smooth(&ones, &region, 0.65).values().iter().all(|&v| v == 1.0));
        let neg = ScalarField3::constant(g, C64::new(-5.0, 0.0));
        let t = truncate_and_smooth(&neg, &region, 0.65);
        let mask = region_mask(&region, &g);
        let centre = g.index(g.nearest_index(0, 0.0).unwrap(), g.nearest_index(1, 0.0).unwrap(), g.nearest_index(2, 0.2).unwrap());
        assert!(mask[centre]);
        assert!((t.values()[centre] - 5.0).abs() < 1e-12);
        for (v, m) in t.values().iter().zip(&mask) {
            assert!(*v >= 1.0);
            if !m {
                assert_eq!(*v, 1.0);
            }
        }
    }

    #[test]
    fn smoothing_preserves_constants_and_mass() {
        let g = Grid3::new([0.0; 3], [1.0; 3], [7, 6, 5]).unwrap();
        let c = RealField3::constant(g, 3.5);
        assert!(smooth3(&c, 0.65).values().iter().all(|v| (v - 3.5).abs() < 1e-14));
        let mut spike = RealField3::constant(g, 0.0);
        let centre = g.index(3, 3, 2);
        spike.values_mut()[centre] = 1.0;
        let s = smooth3(&spike, 0.65);
        assert!((s.values().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let w = gaussian_weights(0.65);
        assert!((s.values()[centre] - w[1].powi(3)).abs() < 1e-15);
        assert!((s.values()[g.index(4, 3, 2)] - w[0] * w[1] * w[1]).abs() < 1e-15);
    }

    #[test]
    fn inner_error_oracle() {
        let g = grid();
        let a = RealField3::constant(g, 1.0);
        assert_eq!(inner_error(&a, &a).unwrap(), 0.0);
        let b = RealField3::constant(g, 1.25);
        assert!((inner_error(&b, &a).unwrap() - 0.25).abs() < 1e-14);
        let c = RealField3::from_fn(g, |x| 1.0 + 0.1 * x[0].sin() * x[2]);
        let d = RealField3::from_fn(g, |x| 1.0 + (x[1] * x[2]).cos().abs());
        let num: f64 = c.values().iter().zip(d.values()).map(|(p, q)| (p - q) * (p - q)).sum();
        let den: f64 = d.values().iter().map(|q| q * q).sum();
        assert!((inner_error(&c, &d).unwrap() - (num / den).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn homogeneous_tail_update() {
        let g = grid();
        let c = RealField3::constant(g, 1.0);
        let chi = cutoff(&g, &default_inner_region(&g)).unwrap();
        let (tail, iters) = update_tail(&c, &chi, 6.7, &LsOptions::default()).unwrap();
        assert_eq!(iters, 0);
        for (gv, lv) in tail.grad_v.values().iter().zip(tail.lap_v.values()) {
            assert!((gv[2] - I * 6.7).norm() < 1e-12 && gv[0].norm() < 1e-12);
            assert!(lv.norm() < 1e-10);
        }
    }

    #[test]
    fn tail_is_self_consistent() {
        let g = grid();
        let inner = default_inner_region(&g);
        let truth = build_coefficient(&[Inclusion::new(Aabb::from_ranges((-0.5, 0.5), (-0.5, 0.5), (0.25, 1.25)), 1.5)], &g, &inner).unwrap();
        let (tail, _) = update_tail(truth.c(), truth.chi(), 6.7, &LsOptions::default()).unwrap();
        let c = coefficient_from_v(&tail.grad_v, &tail.lap_v, 6.7).unwrap();
        for (idx, v) in c.values().iter().enumerate() {
            let chat = 1.0 + truth.chi().values()[idx] * (truth.c().values()[idx] - 1.0);
            assert!((v - chat).norm() < 1e-9);
        }
    }

    #[test]
    fn homogeneous_initial_tail_is_constant() {
        let g = grid();
        let f = FrequencyGrid::new(6.7, 6.2, 3).unwrap();
        let face = gamma_plane(&g);
        let gamma = GammaData {
            g: f.ks().into_iter().map(|k| PlaneField::incident(face, k)).collect(),
            dz_bar: PlaneField::incident(face, 6.7).map(|v| v * I * 6.7),
        };
        let data = complete_boundary_data(&gamma, &f, &g).unwrap();
        let tail = initial_tail(&data, &EllipticOptions::default()).unwrap();
        for v in tail.grad_v.values() {
            assert!((v[2] - I * 6.7).norm() < 1e-7 && v[0].norm() < 1e-7 && v[1].norm() < 1e-7);
        }
        assert!(tail.lap_v.values().iter().all(|v| v.norm() == 0.0));
    }

    fn homogeneous_data(g: &Grid3, f: &FrequencyGrid) -> BoundaryData {
        let face = gamma_plane(g);
        let gamma = GammaData {
            g: f.ks().into_iter().map(|k| PlaneField::incident(face, k)).collect(),
            dz_bar: PlaneField::incident(face, f.k_bar()).map(|v| v * I * f.k_bar()),
        };
        complete_boundary_data(&gamma, f, g).unwrap()
    }

    #[test]
    fn homogeneous_q_is_close_to_iz() {
        let g = grid();
        let f = FrequencyGrid::new(6.7, 6.2, 9).unwrap();
        let data = homogeneous_data(&g, &f);
        let tail = TailState::incident(g, 6.7);
        let state = IterateState {
            n: 1,
            i: 1,
            q_fields: Vec::new(),
            big_q: ScalarField3::zeros(g),
            prev_q_grad: tail.grad_v.scale(C64::new(1.0 / 6.7, 0.0)),
            c_current: RealField3::constant(g, 1.0),
            tail,
            error_log: Vec::new(),
        };
        let (q, _) = qn_solve(&state, data.psi(1), f.k(1), f.h(), &EllipticOptions::default()).unwrap();
        let exact = ScalarField3::from_fn(g, |x| I * x[2]);
        let gap = crate::ops::relative_l2_error(&q, &exact).unwrap();
        assert!(gap < 0.1, "{gap}");
    }

    #[test]
    fn q_solve_is_linear_in_source_and_trace() {
        // With grad V = 0 and Q = 0 the source is 2 Delta V / k.
        let g = Grid3::covering(&Aabb::new([-1.0; 3], [1.0; 3]), 0.25).unwrap();
        let idx = BoundaryIndex::new(g);
        let psi = BoundaryTrace::from_fn(idx, |x| C64::new(x[0], x[2]));
        let state = |lap: C64| IterateState {
            n: 1,
            i: 1,
            q_fields: Vec::new(),
            big_q: ScalarField3::zeros(g),
            prev_q_grad: VectorField3::zeros(g),
            c_current: RealField3::constant(g, 1.0),
            tail: TailState { grad_v: VectorField3::zeros(g), lap_v: ScalarField3::constant(g, lap) },
            error_log: Vec::new(),
        };
        let opts = EllipticOptions { tol: 1e-12, ..Default::default() };
        let base = C64::new(1.0, 0.5);
        let lam = C64::new(0.3, 2.0);
        let (a, _) = qn_solve(&state(base), &psi, 6.5, 0.05, &opts).unwrap();
        let (b, _) = qn_solve(&state(base * lam), &psi.scale(lam), 6.5, 0.05, &opts).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x * lam - y).norm() < 1e-9);
        }
    }

    #[test]
    fn passing_run_finds_first_window() {
        assert_eq!(passing_run(&[1.0, 0.1, 0.1, 0.1, 1.0], 0.5, 3), Some(1..4));
        assert_eq!(passing_run(&[0.1, 0.1, 1.0, 0.1, 0.1], 0.5, 3), None);
        assert_eq!(passing_run(&[0.1, 0.1, 0.1, 0.1, 0.1], 0.5, 3), Some(0..5));
        assert_eq!(passing_run(&[0.5, 0.5, 0.5], 0.5, 3), Some(0..3));
    }

    #[test]
    fn homogeneous_reconstruction_stays_at_one() {
        let g = grid();
        let f = FrequencyGrid::new(6.7, 6.2, 9).unwrap();
        let data = homogeneous_data(&g, &f);
        let region = square_region(0.6);
        let res = run_reconstruction(&data, &region, None, &GcmOptions::default()).unwrap();
        assert!(res.c_comp.values().iter().all(|&v| (v - 1.0).abs() <= 0.02), "{}", res.c_max());
        assert_eq!(res.stop, StopReason::Converged);
        assert!(res.outer_iterations() <= 5);
        // Q bookkeeping.
        let again = run_reconstruction(&data, &region, None, &GcmOptions::default()).unwrap();
        assert_eq!(again.c_comp, res.c_comp);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn truncation_is_bounded_below(vals in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 7 * 6 * 5)) {
            let g = Grid3::new([-0.3, -0.3, -0.7], [0.1; 3], [7, 6, 5]).unwrap();
            let raw = ScalarField3::new(g, vals.into_iter().map(|(a, b)| C64::new(a, b)).collect()).unwrap();
            let p = PlaneGrid::cell_centred(-0.75, (-0.3, 0.3), (-0.3, 0.3), 6, 6).unwrap();
            let comp = TargetComponent { nodes: vec![(2, 2), (3, 2), (2, 3)], peak: (2, 2), peak_value: 1.0, center: (0.0, 0.0) };
            let region = TargetRegion::new(p, vec![comp], TARGET_Z_RANGE).unwrap();
            let t = truncate_and_smooth(&raw, &region, 0.65);
            prop_assert!(t.values().iter().all(|&v| v >= 1.0));
        }
    }
}
