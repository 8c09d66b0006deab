//! The descending wavenumber grid `k_0 = k_bar > k_1 > ... > k_N = k_under`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    k_bar: f64,
    k_under: f64,
    n: usize,
}

impl FrequencyGrid {
    pub fn new(k_bar: f64, k_under: f64, n: usize) -> Result<Self> {
        if !(k_under > 1.0) || !(k_bar > k_under) || !k_bar.is_finite() {
            return Err(Error::invalid(format!(
                "wavenumbers must satisfy k_bar > k_under > 1, got [{k_under}, {k_bar}]"
            )));
        }
        if n == 0 {
            return Err(Error::invalid("the frequency grid needs at least one subinterval"));
        }
        Ok(Self { k_bar, k_under, n })
    }

    /// Rebuild a grid from an explicit descending list, checking uniform steps.
    pub fn from_list(ks: &[f64]) -> Result<Self> {
        if ks.len() < 2 {
            return Err(Error::invalid("at least two wavenumbers are required"));
        }
        let g = Self::new(ks[0], ks[ks.len() - 1], ks.len() - 1)?;
        for (n, &k) in ks.iter().enumerate() {
            if (k - g.k(n)).abs() > 1e-12 {
                return Err(Error::invalid(format!("wavenumber list is not uniform at position {n}")));
            }
        }
        Ok(g)
    }

    pub fn k_bar(&self) -> f64 {
        self.k_bar
    }

    pub fn k_under(&self) -> f64 {
        self.k_under
    }

    /// Number of subintervals `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        (self.k_bar - self.k_under) / self.n as f64
    }

    /// `k_n = k_bar - n h`, with the endpoint returned exactly.
    pub fn k(&self, n: usize) -> f64 {
        assert!(n <= self.n, "frequency index {n} out of range");
        if n == self.n {
            self.k_under
        } else {
            self.k_bar - n as f64 * self.h()
        }
    }

    pub fn ks(&self) -> Vec<f64> {
        (0..=self.n).map(|n| self.k(n)).collect()
    }

    /// Index of the grid wavenumber closest to `k`.
    pub fn nearest(&self, k: f64) -> usize {
        (0..=self.n)
            .min_by(|&a, &b| (self.k(a) - k).abs().total_cmp(&(self.k(b) - k).abs()))
            .unwrap_or(0)
    }
}
