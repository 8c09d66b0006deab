//! Restarted GMRES for complex non-Hermitian systems.
//!
//! Matrix-free: the operator and the optional right preconditioner are
//! closures over flat vectors. Right preconditioning keeps the monitored
//! residual equal to the true residual of the original system.

use crate::field::{C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Relative residual target `||b - A x|| / ||b||`.
    pub tol: f64,
    /// Total inner iterations across all restarts.
    pub max_iter: usize,
    /// Krylov dimension before restart.
    pub restart: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 500, restart: 40 }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `<a, b>` with the conjugate on `a`.
fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solve `A x = b` from the initial guess `x0` (zero when `None`).
///
/// `apply(v, out)` writes `A v` into `out`; `precond(v, out)` writes `M^{-1} v`.
pub fn gmres<A, P>(mut apply: A, mut precond: Option<P>, b: &[C64], x0: Option<Vec<C64>>, opts: &GmresOptions) -> GmresOutcome
where
    A: FnMut(&[C64], &mut [C64]),
    P: FnMut(&[C64], &mut [C64]),
{
    let n = b.len();
    let b_norm = norm(b);
    let mut x = x0.unwrap_or_else(|| vec![ZERO; n]);
    assert_eq!(x.len(), n, "initial guess has the wrong length");
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = ZERO);
        return GmresOutcome { x, iterations: 0, residual: 0.0, converged: true };
    }

    let m = opts.restart.max(1);
    let mut tmp = vec![ZERO; n];
    let mut z = vec![ZERO; n];
    let mut r = vec![ZERO; n];
    let mut iterations = 0;

    let residual_of = |x: &[C64], apply: &mut A, tmp: &mut Vec<C64>, r: &mut Vec<C64>| {
        apply(x, tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        norm(r)
    };

    let mut beta = residual_of(&x, &mut apply, &mut tmp, &mut r);
    let mut rel = beta / b_norm;

    while rel > opts.tol && iterations < opts.max_iter {
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut used = 0;

        for j in 0..m {
            if iterations >= opts.max_iter {
                break;
            }
            iterations += 1;
            // w = A M^{-1} v_j
            match precond.as_mut() {
                Some(p) => {
                    p(&basis[j], &mut z);
                    apply(&z, &mut tmp);
                }
                None => apply(&basis[j], &mut tmp),
            }
            let mut w = tmp.clone();
            // Modified Gram-Schmidt, twice for stability.
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dotc(v, &w);
                    h[i][j] += hij;
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= hij * vk;
                    }
                }
            }
            let wn = norm(&w);
            h[j + 1][j] = C64::new(wn, 0.0);

            // Apply previous Givens rotations to the new column.
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i].conj() * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let a = h[j][j];
            let bb = h[j + 1][j];
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if denom == 0.0 {
                cs[j] = 1.0;
                sn[j] = ZERO;
            } else if a.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = bb.conj() / bb.norm();
            } else {
                cs[j] = a.norm() / denom;
                sn[j] = (a / a.norm()) * bb.conj() / denom;
            }
            h[j][j] = cs[j] * a + sn[j] * bb;
            h[j + 1][j] = ZERO;
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] *= cs[j];
            used = j + 1;

            let est = g[j + 1].norm() / b_norm;
            if est <= opts.tol || wn == 0.0 {
                break;
            }
            basis.push(w.into_iter().map(|v| v / wn).collect());
        }

        // Back substitution for the least-squares coefficients.
        let mut y = vec![ZERO; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= h[i][k] * y[k];
            }
            y[i] = if h[i][i].norm() == 0.0 { ZERO } else { s / h[i][i] };
        }
        let mut update = vec![ZERO; n];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, vk) in update.iter_mut().zip(v) {
                *u += yi * vk;
            }
        }
        match precond.as_mut() {
            Some(p) => {
                p(&update, &mut z);
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi += zi;
                }
            }
            None => {
                for (xi, ui) in x.iter_mut().zip(&update) {
                    *xi += ui;
                }
            }
        }

        let new_beta = residual_of(&x, &mut apply, &mut tmp, &mut r);
        let stagnated = new_beta >= beta * (1.0 - 1e-12) && used > 0;
        beta = new_beta;
        rel = beta / b_norm;
        if stagnated && rel > opts.tol {
            break;
        }
    }

    GmresOutcome { x, iterations, residual: rel, converged: rel <= opts.tol }
}

/// GMRES without a preconditioner.
pub fn gmres_plain<A>(apply: A, b: &[C64], opts: &GmresOptions) -> GmresOutcome
where
    A: FnMut(&[C64], &mut [C64]),
{
    gmres(apply, None::<fn(&[C64], &mut [C64])>, b, None, opts)
}
