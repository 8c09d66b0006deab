//! Dirichlet problems `Delta w - p . grad w = f` on the grid box.
//!
//! Second-order finite differences (7-point Laplacian, central drift) on the
//! interior nodes; boundary nodes carry the Dirichlet trace. The system is
//! solved by GMRES right-preconditioned with the exact inverse of the
//! discrete Dirichlet Laplacian, applied through sine transforms.

use crate::boundary::BoundaryTrace;
use crate::error::{Error, Result};
use crate::fft::Dst3;
use crate::field::{ScalarField3, VectorField3, C64, ZERO};
use crate::grid::Grid3;
use crate::krylov::{gmres, GmresOptions};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EllipticOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for EllipticOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 2000, restart: 50 }
    }
}

/// Drift magnitude above which the small-drift regime is considered violated.
pub const DRIFT_WARNING: f64 = 2.0;

struct Stencil {
    grid: Grid3,
    inner: [usize; 3],
    inv_h2: [f64; 3],
    inv_2h: [f64; 3],
}

impl Stencil {
    fn new(grid: &Grid3) -> Result<Self> {
        if grid.dims.iter().any(|&n| n < 3) {
            return Err(Error::invalid(format!("Dirichlet problem needs at least 3 nodes per axis, got {:?}", grid.dims)));
        }
        Ok(Self {
            grid: *grid,
            inner: grid.dims.map(|n| n - 2),
            inv_h2: grid.spacing.map(|h| 1.0 / (h * h)),
            inv_2h: grid.spacing.map(|h| 0.5 / h),
        })
    }

    fn inner_len(&self) -> usize {
        self.inner.iter().product()
    }

    /// `(Delta w - p . grad w)` at every interior node of the full array `w`.
    fn apply(&self, w: &[C64], p: Option<&[[C64; 3]]>, out: &mut [C64]) {
        let [n0, n1, _] = self.grid.dims;
        let s = [1, n0, n0 * n1];
        let [m0, m1, m2] = self.inner;
        let mut o = 0;
        for k in 1..=m2 {
            for j in 1..=m1 {
                let row = self.grid.index(0, j, k);
                for i in 1..=m0 {
                    let idx = row + i;
                    let c = w[idx];
                    let mut acc = ZERO;
                    for a in 0..3 {
                        acc += (w[idx + s[a]] - 2.0 * c + w[idx - s[a]]) * self.inv_h2[a];
                    }
                    if let Some(p) = p {
                        let pv = &p[idx];
                        for a in 0..3 {
                            acc -= pv[a] * (w[idx + s[a]] - w[idx - s[a]]) * self.inv_2h[a];
                        }
                    }
                    out[o] = acc;
                    o += 1;
                }
            }
        }
    }

    fn scatter(&self, inner: &[C64], full: &mut [C64]) {
        let [m0, m1, m2] = self.inner;
        for k in 0..m2 {
            for j in 0..m1 {
                let row = self.grid.index(1, j + 1, k + 1);
                full[row..row + m0].copy_from_slice(&inner[(k * m1 + j) * m0..(k * m1 + j + 1) * m0]);
            }
        }
    }
}

/// Exact inverse of the interior Dirichlet Laplacian by DST diagonalisation.
struct LaplaceInverse {
    dst: Dst3,
    inv_eig: Vec<f64>,
}

impl LaplaceInverse {
    fn new(st: &Stencil) -> Self {
        let dst = Dst3::new(st.inner);
        let axis_eig = |a: usize| -> Vec<f64> {
            let n = st.inner[a];
            (1..=n)
                .map(|m| {
                    let s = (std::f64::consts::PI * m as f64 / (2.0 * (n + 1) as f64)).sin();
                    -4.0 * st.inv_h2[a] * s * s
                })
                .collect()
        };
        let (ex, ey, ez) = (axis_eig(0), axis_eig(1), axis_eig(2));
        let scale = dst.inverse_scale();
        let mut inv_eig = Vec::with_capacity(st.inner_len());
        for z in &ez {
            for y in &ey {
                for x in &ex {
                    inv_eig.push(scale / (x + y + z));
                }
            }
        }
        Self { dst, inv_eig }
    }

    fn apply(&self, v: &[C64], out: &mut [C64]) {
        out.copy_from_slice(v);
        self.dst.transform(out);
        for (o, e) in out.iter_mut().zip(&self.inv_eig) {
            *o *= *e;
        }
        self.dst.transform(out);
    }
}

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub w: ScalarField3,
    pub iterations: usize,
    /// Relative residual of the interior equations.
    pub residual: f64,
}

/// Solve `Delta w - p_grad . grad w = f` in the interior with `w = mu` on the
/// boundary. `p_grad = None` gives the Poisson problem.
pub fn solve_dirichlet_full(
    p_grad: Option<&VectorField3>,
    f: &ScalarField3,
    mu: &BoundaryTrace,
    opts: &EllipticOptions,
) -> Result<EllipticSolution> {
    let grid = *f.grid();
    mu.ensure_compatible(&grid)?;
    if let Some(p) = p_grad {
        grid.ensure_matches(p.grid(), "solve_dirichlet drift")?;
        let pmax = p.max_norm();
        if pmax > DRIFT_WARNING {
            log::warn!("drift |grad p| = {pmax:.3} exceeds {DRIFT_WARNING}; the small-drift regime may not hold");
        }
    }
    let st = Stencil::new(&grid)?;
    let p = p_grad.map(|p| p.values());

    // Lift the boundary data: b = f - A(mu extended by zero).
    let mut full = vec![ZERO; grid.len()];
    for (idx, v) in mu.iter() {
        full[idx] = v;
    }
    let mut lift = vec![ZERO; st.inner_len()];
    st.apply(&full, p, &mut lift);
    let [m0, m1, m2] = st.inner;
    let mut b = Vec::with_capacity(st.inner_len());
    for k in 1..=m2 {
        for j in 1..=m1 {
            let row = grid.index(1, j, k);
            b.extend_from_slice(&f.values()[row..row + m0]);
        }
    }
    for (bi, l) in b.iter_mut().zip(&lift) {
        *bi -= l;
    }

    let precond = LaplaceInverse::new(&st);
    let mut work = vec![ZERO; grid.len()];
    let out = gmres(
        |x, y| {
            st.scatter(x, &mut work);
            st.apply(&work, p, y);
        },
        Some(|x: &[C64], y: &mut [C64]| precond.apply(x, y)),
        &b,
        None,
        &GmresOptions { tol: opts.tol, max_iter: opts.max_iter, restart: opts.restart },
    );
    if !out.converged {
        return Err(Error::NotConverged { stage: "elliptic", iterations: out.iterations, residual: out.residual });
    }
    st.scatter(&out.x, &mut full);
    let w = ScalarField3::new(grid, full).map_err(|e| e.at_stage("elliptic"))?;
    Ok(EllipticSolution { w, iterations: out.iterations, residual: out.residual })
}

/// Solve `Delta w - p_grad . grad w = f` with Dirichlet trace `mu`.
pub fn solve_dirichlet(p_grad: &VectorField3, f: &ScalarField3, mu: &BoundaryTrace, opts: &EllipticOptions) -> Result<ScalarField3> {
    Ok(solve_dirichlet_full(Some(p_grad), f, mu, opts)?.w)
}

/// Harmonic extension of a boundary trace.
pub fn solve_laplace_component(boundary: &BoundaryTrace, opts: &EllipticOptions) -> Result<ScalarField3> {
    let f = ScalarField3::zeros(*boundary.grid());
    Ok(solve_dirichlet_full(None, &f, boundary, opts)?.w)
}

/// Interior residual `Delta w - p . grad w - f` of the discrete equations,
/// zero on the boundary.
pub fn dirichlet_residual(p_grad: Option<&VectorField3>, f: &ScalarField3, w: &ScalarField3) -> Result<ScalarField3> {
    let grid = *w.grid();
    grid.ensure_matches(f.grid(), "dirichlet_residual")?;
    let st = Stencil::new(&grid)?;
    let mut inner = vec![ZERO; st.inner_len()];
    st.apply(w.values(), p_grad.map(|p| p.values()), &mut inner);
    let mut full = vec![ZERO; grid.len()];
    st.scatter(&inner, &mut full);
    for (idx, v) in full.iter_mut().enumerate() {
        let [i, j, k] = grid.ijk(idx);
        if !grid.is_boundary(i, j, k) {
            *v -= f.values()[idx];
        }
    }
    Ok(ScalarField3::from_vec_unchecked(grid, full))
}
