//! Angular-spectrum transport of plane data between parallel planes.
//!
//! A plane field is decomposed into plane waves `exp(i (xi x + eta y))`. A
//! propagating mode (`xi^2 + eta^2 < k^2`) travelling along `s z` picks up the
//! phase `exp(i s k_z dz)` with `k_z = sqrt(k^2 - xi^2 - eta^2)`; evanescent
//! modes are discarded.

use crate::error::{Error, Result};
use crate::fft::{angular_frequency, smooth_len, Fft3};
use crate::field::{C64, ZERO};
use crate::plane::{PlaneField, PlaneGrid};
use serde::{Deserialize, Serialize};

/// Direction of travel of the field being propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Travel {
    /// Towards `+z`, like the incident wave `exp(i k z)`.
    Up,
    /// Towards `-z`, like the field scattered back to a plane below the target.
    Down,
}

impl Travel {
    pub fn sign(self) -> f64 {
        match self {
            Travel::Up => 1.0,
            Travel::Down => -1.0,
        }
    }
}

/// Default zero-padding factor of the 2D transforms.
pub const DEFAULT_PAD_FACTOR: usize = 2;

/// The band-limited angular spectrum of one plane field.
#[derive(Debug, Clone)]
pub struct AngularSpectrum {
    grid: PlaneGrid,
    k: f64,
    travel: Travel,
    pad: [usize; 2],
    coeffs: Vec<C64>,
    kz: Vec<f64>,
}

impl AngularSpectrum {
    /// Transform `f` after zero padding to at least `pad_factor` times its size
    /// (`pad_factor = 1` keeps the field periodic on its own rectangle).
    pub fn new(f: &PlaneField, travel: Travel, pad_factor: usize) -> Result<Self> {
        if pad_factor == 0 {
            return Err(Error::invalid("padding factor must be at least 1"));
        }
        let g = *f.grid();
        let pad = if pad_factor == 1 {
            [g.nx, g.ny]
        } else {
            [smooth_len(pad_factor * g.nx), smooth_len(pad_factor * g.ny)]
        };
        let fft = Fft3::new([pad[0], pad[1], 1]);
        let mut coeffs = vec![ZERO; pad[0] * pad[1]];
        for j in 0..g.ny {
            coeffs[j * pad[0]..j * pad[0] + g.nx].copy_from_slice(&f.values()[j * g.nx..(j + 1) * g.nx]);
        }
        fft.forward(&mut coeffs);
        let k = f.k();
        let mut kz = vec![0.0; coeffs.len()];
        let scale = 1.0 / coeffs.len() as f64;
        for b in 0..pad[1] {
            let eta = angular_frequency(b, pad[1], g.dy);
            for a in 0..pad[0] {
                let xi = angular_frequency(a, pad[0], g.dx);
                let idx = b * pad[0] + a;
                let t = k * k - xi * xi - eta * eta;
                if t > 0.0 {
                    kz[idx] = t.sqrt();
                    coeffs[idx] *= scale;
                } else {
                    coeffs[idx] = ZERO;
                }
            }
        }
        Ok(Self { grid: g, k, travel, pad, coeffs, kz })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn travel(&self) -> Travel {
        self.travel
    }

    pub fn grid(&self) -> &PlaneGrid {
        &self.grid
    }

    /// Mode amplitudes advanced by `dz` and multiplied by `(i s k_z)^order`.
    fn advanced(&self, dz: f64, order: u32) -> Vec<C64> {
        let s = self.travel.sign();
        self.coeffs
            .iter()
            .zip(&self.kz)
            .map(|(&c, &kz)| {
                if c == ZERO {
                    ZERO
                } else {
                    c * C64::from_polar(1.0, s * kz * dz) * C64::new(0.0, s * kz).powu(order)
                }
            })
            .collect()
    }

    /// The field on the original sampling rectangle at height `z`.
    pub fn field_at(&self, z: f64) -> PlaneField {
        self.field_from(self.advanced(z - self.grid.z, 0), z)
    }

    /// Spectrally exact `d/dz` of the propagated field at height `z`.
    pub fn dz_at(&self, z: f64) -> PlaneField {
        self.field_from(self.advanced(z - self.grid.z, 1), z)
    }

    fn field_from(&self, mut buf: Vec<C64>, z: f64) -> PlaneField {
        // The coefficients already carry the 1/N factor, so undo the one the
        // inverse transform applies.
        let fft = Fft3::new([self.pad[0], self.pad[1], 1]);
        fft.inverse(&mut buf);
        let n = buf.len() as f64;
        let g = self.grid.with_z(z);
        let mut values = Vec::with_capacity(g.len());
        for j in 0..g.ny {
            values.extend(buf[j * self.pad[0]..j * self.pad[0] + g.nx].iter().map(|v| v * n));
        }
        PlaneField::from_vec_unchecked(g, self.k, values)
    }

    /// Evaluate the band-limited interpolant of the field (or of its
    /// `order`-th z-derivative) at height `z` on the tensor grid `xs x ys`
    /// (x-fastest output).
    pub fn sample(&self, z: f64, xs: &[f64], ys: &[f64], order: u32) -> Vec<C64> {
        let c = self.advanced(z - self.grid.z, order);
        let [mx, my] = self.pad;
        let ex: Vec<Vec<C64>> = xs
            .iter()
            .map(|&x| {
                (0..mx)
                    .map(|a| C64::from_polar(1.0, angular_frequency(a, mx, self.grid.dx) * (x - self.grid.x0)))
                    .collect()
            })
            .collect();
        let ey: Vec<Vec<C64>> = ys
            .iter()
            .map(|&y| {
                (0..my)
                    .map(|b| C64::from_polar(1.0, angular_frequency(b, my, self.grid.dy) * (y - self.grid.y0)))
                    .collect()
            })
            .collect();
        let active: Vec<usize> = (0..my).filter(|&b| c[b * mx..(b + 1) * mx].iter().any(|v| *v != ZERO)).collect();
        // t[i][b] = sum_a c[a, b] ex[i][a]
        let mut t = vec![ZERO; xs.len() * my];
        for (i, exi) in ex.iter().enumerate() {
            for &b in &active {
                t[i * my + b] = c[b * mx..(b + 1) * mx].iter().zip(exi).map(|(p, q)| p * q).sum();
            }
        }
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for eyj in &ey {
            for i in 0..xs.len() {
                out.push(active.iter().map(|&b| t[i * my + b] * eyj[b]).sum());
            }
        }
        out
    }
}

/// Propagate `f` to the plane `z = z_target` with the default padding.
pub fn angular_spectrum_propagate(f: &PlaneField, z_target: f64, travel: Travel) -> Result<PlaneField> {
    angular_spectrum_propagate_with(f, z_target, travel, DEFAULT_PAD_FACTOR)
}

pub fn angular_spectrum_propagate_with(f: &PlaneField, z_target: f64, travel: Travel, pad_factor: usize) -> Result<PlaneField> {
    if !(z_target - f.z()).is_normal() {
        return Err(Error::invalid(format!("propagation distance from z = {} to {z_target} must be non-zero", f.z())));
    }
    Ok(AngularSpectrum::new(f, travel, pad_factor)?.field_at(z_target))
}

/// Forward difference `(P(z + eps) - P(z)) / eps` of the propagated field,
/// where `P(z)` is the band-limited part of `f` itself.
pub fn z_derivative_via_propagation(f: &PlaneField, epsilon: f64, travel: Travel) -> Result<PlaneField> {
    z_derivative_via_propagation_with(f, epsilon, travel, DEFAULT_PAD_FACTOR)
}

pub fn z_derivative_via_propagation_with(f: &PlaneField, epsilon: f64, travel: Travel, pad_factor: usize) -> Result<PlaneField> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let spec = AngularSpectrum::new(f, travel, pad_factor)?;
    let ahead = spec.field_at(f.z() + epsilon);
    let here = spec.field_at(f.z());
    let values = ahead.values().iter().zip(here.values()).map(|(a, b)| (a - b) / epsilon).collect();
    Ok(PlaneField::from_vec_unchecked(*f.grid(), f.k(), values))
}
