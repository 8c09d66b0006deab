//! Plane data over the whole wavenumber grid.

use crate::error::{Error, Result};
use crate::freq::FrequencyGrid;
use crate::plane::{PlaneField, PlaneGrid};

/// One [`PlaneField`] per wavenumber `k_n`, all on the same plane.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    plane: PlaneGrid,
    freqs: FrequencyGrid,
    samples: Vec<PlaneField>,
    /// Relative noise level that was applied, when known. The file format
    /// does not carry it, so sets read from disk report `None`.
    pub noise_level: Option<f64>,
}

impl MeasurementSet {
    pub fn new(freqs: FrequencyGrid, samples: Vec<PlaneField>, noise_level: Option<f64>) -> Result<Self> {
        if samples.len() != freqs.n() + 1 {
            return Err(Error::invalid(format!(
                "{} plane fields for {} wavenumbers",
                samples.len(),
                freqs.n() + 1
            )));
        }
        let plane = *samples[0].grid();
        for (n, s) in samples.iter().enumerate() {
            if *s.grid() != plane {
                return Err(Error::GridMismatch(format!("plane field {n} has a different geometry")));
            }
            if (s.k() - freqs.k(n)).abs() > 1e-12 {
                return Err(Error::invalid(format!("plane field {n} has k = {}, expected {}", s.k(), freqs.k(n))));
            }
        }
        if let Some(level) = noise_level {
            if !(level >= 0.0) {
                return Err(Error::invalid(format!("noise level must be non-negative, got {level}")));
            }
        }
        Ok(Self { plane, freqs, samples, noise_level })
    }

    pub fn plane(&self) -> &PlaneGrid {
        &self.plane
    }

    pub fn freqs(&self) -> &FrequencyGrid {
        &self.freqs
    }

    pub fn samples(&self) -> &[PlaneField] {
        &self.samples
    }

    pub fn sample(&self, n: usize) -> &PlaneField {
        &self.samples[n]
    }

    pub fn into_samples(self) -> Vec<PlaneField> {
        self.samples
    }

    /// Apply `f` to every plane field, keeping the frequency grid.
    pub fn try_map(&self, mut f: impl FnMut(usize, &PlaneField) -> Result<PlaneField>) -> Result<Self> {
        let samples = self.samples.iter().enumerate().map(|(n, s)| f(n, s)).collect::<Result<Vec<_>>>()?;
        Self::new(self.freqs, samples, self.noise_level)
    }
}
