//! Finite-difference operators and discrete norms on [`Grid3`] fields.
//!
//! Interior nodes use second-order central differences; face nodes use
//! second-order one-sided stencils so that no operator reads outside the grid.

use crate::error::{Error, Result};
use crate::field::{RealField3, ScalarField3, VectorField3, C64, I, ZERO};
use crate::grid::Grid3;

fn ensure_min_dims(grid: &Grid3, what: &str) -> Result<()> {
    if grid.dims.iter().any(|&n| n < 3) {
        return Err(Error::invalid(format!("{what} needs at least 3 nodes per axis, got {:?}", grid.dims)));
    }
    Ok(())
}

fn strides(grid: &Grid3) -> [usize; 3] {
    [1, grid.dims[0], grid.dims[0] * grid.dims[1]]
}

/// First derivative along `axis`.
fn d1(values: &[C64], grid: &Grid3, axis: usize) -> Vec<C64> {
    let n = grid.dims[axis];
    let s = strides(grid)[axis];
    let inv2h = 0.5 / grid.spacing[axis];
    let mut out = vec![ZERO; values.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let p = grid.ijk(idx)[axis];
        *o = if p == 0 {
            (-3.0 * values[idx] + 4.0 * values[idx + s] - values[idx + 2 * s]) * inv2h
        } else if p + 1 == n {
            (3.0 * values[idx] - 4.0 * values[idx - s] + values[idx - 2 * s]) * inv2h
        } else {
            (values[idx + s] - values[idx - s]) * inv2h
        };
    }
    out
}

/// Second derivative along `axis`.
fn d2(values: &[C64], grid: &Grid3, axis: usize) -> Vec<C64> {
    let n = grid.dims[axis];
    let s = strides(grid)[axis];
    let inv_h2 = 1.0 / (grid.spacing[axis] * grid.spacing[axis]);
    let mut out = vec![ZERO; values.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let p = grid.ijk(idx)[axis];
        *o = if p == 0 {
            if n >= 4 {
                (2.0 * values[idx] - 5.0 * values[idx + s] + 4.0 * values[idx + 2 * s] - values[idx + 3 * s]) * inv_h2
            } else {
                (values[idx] - 2.0 * values[idx + s] + values[idx + 2 * s]) * inv_h2
            }
        } else if p + 1 == n {
            if n >= 4 {
                (2.0 * values[idx] - 5.0 * values[idx - s] + 4.0 * values[idx - 2 * s] - values[idx - 3 * s]) * inv_h2
            } else {
                (values[idx] - 2.0 * values[idx - s] + values[idx - 2 * s]) * inv_h2
            }
        } else {
            (values[idx + s] - 2.0 * values[idx] + values[idx - s]) * inv_h2
        };
    }
    out
}

pub fn gradient(f: &ScalarField3) -> Result<VectorField3> {
    let grid = *f.grid();
    ensure_min_dims(&grid, "gradient")?;
    let dx = d1(f.values(), &grid, 0);
    let dy = d1(f.values(), &grid, 1);
    let dz = d1(f.values(), &grid, 2);
    let values = (0..grid.len()).map(|n| [dx[n], dy[n], dz[n]]).collect();
    Ok(VectorField3::from_vec_unchecked(grid, values))
}

pub fn laplacian(f: &ScalarField3) -> Result<ScalarField3> {
    let grid = *f.grid();
    ensure_min_dims(&grid, "laplacian")?;
    let mut acc = d2(f.values(), &grid, 0);
    for axis in 1..3 {
        for (a, b) in acc.iter_mut().zip(d2(f.values(), &grid, axis)) {
            *a += b;
        }
    }
    Ok(ScalarField3::from_vec_unchecked(grid, acc))
}

pub fn divergence(v: &VectorField3) -> Result<ScalarField3> {
    let grid = *v.grid();
    ensure_min_dims(&grid, "divergence")?;
    let mut acc = vec![ZERO; grid.len()];
    for axis in 0..3 {
        let comp = v.component(axis);
        for (a, b) in acc.iter_mut().zip(d1(comp.values(), &grid, axis)) {
            *a += b;
        }
    }
    Ok(ScalarField3::from_vec_unchecked(grid, acc))
}

/// `grad(u) / u`, computed as `i k e3 + grad(w) / w` with `w = u exp(-i k x3)`.
///
/// Factoring out the incident phase keeps the difference quotient from
/// resolving the carrier wave, so a plane wave `exp(i k x3)` maps exactly to
/// `(0, 0, i k)`. Returns the field and the number of nodes where `|u|` was
/// below `floor` (those nodes are divided by `floor` instead).
pub fn log_gradient(u: &ScalarField3, k: f64, floor: f64) -> Result<(VectorField3, usize)> {
    let grid = *u.grid();
    let w = ScalarField3::from_vec_unchecked(
        grid,
        u.values()
            .iter()
            .enumerate()
            .map(|(idx, &v)| v * C64::from_polar(1.0, -k * grid.node_at(idx)[2]))
            .collect(),
    );
    let gw = gradient(&w)?;
    let mut floored = 0;
    let values = gw
        .values()
        .iter()
        .zip(w.values())
        .map(|(g, &wv)| {
            let denom = if wv.norm() < floor {
                floored += 1;
                if wv.norm() == 0.0 {
                    C64::new(floor, 0.0)
                } else {
                    wv / wv.norm() * floor
                }
            } else {
                wv
            };
            [g[0] / denom, g[1] / denom, g[2] / denom + I * k]
        })
        .collect();
    Ok((VectorField3::from_vec_unchecked(grid, values), floored))
}

/// Discrete L2 norm: square root of the sum of `|f|^2` times the cell volume.
pub fn l2_norm(f: &ScalarField3) -> f64 {
    (f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * f.grid().cell_volume()).sqrt()
}

pub fn l2_norm_real(f: &RealField3) -> f64 {
    (f.values().iter().map(|v| v * v).sum::<f64>() * f.grid().cell_volume()).sqrt()
}

/// `||a - b|| / ||b||` in the discrete L2 norm over the grid.
pub fn relative_l2_error(a: &ScalarField3, b: &ScalarField3) -> Result<f64> {
    a.grid().ensure_matches(b.grid(), "relative_l2_error")?;
    let den: f64 = b.values().iter().map(|v| v.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::invalid("relative_l2_error: reference field has zero norm"));
    }
    let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm_sqr()).sum();
    Ok((num / den).sqrt())
}

pub fn relative_l2_error_real(a: &RealField3, b: &RealField3) -> Result<f64> {
    a.grid().ensure_matches(b.grid(), "relative_l2_error")?;
    let den: f64 = b.values().iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::invalid("relative_l2_error: reference field has zero norm"));
    }
    let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((num / den).sqrt())
}
