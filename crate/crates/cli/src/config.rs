//! Run configuration, read from and echoed to TOML.

use anyhow::{bail, Context, Result};
use gcm_core::{Aabb, FrequencyGrid, GcmOptions, Grid3, Inclusion, LsOptions, PlaneGrid, Travel};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// How the faces of the box other than the measured one are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exact simulated traces on every face but the measured one.
    Complete,
    /// The incident wave on every face but the measured one.
    Backscatter,
}

/// The measurement rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub z: f64,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl PlaneSpec {
    pub fn grid(&self) -> gcm_core::Result<PlaneGrid> {
        PlaneGrid::cell_centred(self.z, self.x, self.y, self.nx, self.ny)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub inclusions: Vec<Inclusion>,
    pub k_bar: f64,
    pub k_under: f64,
    pub n: usize,
    pub noise: f64,
    pub seed: u64,
    pub mode: Mode,
    pub spacing: f64,
    pub domain: Aabb,
    pub plane: PlaneSpec,
    /// Plane the scattered data are propagated to; the bottom face of the box.
    pub propagate_z: f64,
    /// Step of the one-sided `z` difference of the propagated data.
    pub epsilon: f64,
    pub travel: Travel,
    /// Super-level ratio of the target footprints.
    pub threshold: f64,
    /// Wavenumber whose propagated data locate the targets.
    pub locate_k: f64,
    /// Forward solver used to synthesise data.
    pub ls: LsOptions,
    pub gcm: GcmOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::cube()
    }
}

fn cube(min: [f64; 3], max: [f64; 3]) -> Inclusion {
    Inclusion::new(Aabb::new(min, max), 5.0)
}

impl RunConfig {
    /// A single cube of side 0.6 with `c = 5` whose front face is at `z = 0`.
    pub fn cube() -> Self {
        Self {
            scenario: "cube".into(),
            inclusions: vec![cube([-0.3, -0.3, 0.0], [0.3, 0.3, 0.6])],
            k_bar: 6.7,
            k_under: 6.2,
            n: 9,
            noise: 0.15,
            seed: 1,
            mode: Mode::Complete,
            spacing: 0.067,
            domain: Aabb::default_domain(),
            plane: PlaneSpec { z: -7.6, x: (-5.0, 5.0), y: (-5.0, 5.0), nx: 100, ny: 100 },
            propagate_z: -0.75,
            epsilon: 0.1,
            travel: Travel::Down,
            threshold: 0.7,
            locate_k: 6.48,
            ls: LsOptions::default(),
            gcm: GcmOptions::default(),
        }
    }

    /// Two cubes of side 0.4 centred at `(-0.8, 0, 0.2)` and `(0.8, 0, 0.2)`.
    pub fn two_cubes() -> Self {
        Self {
            scenario: "two_cubes".into(),
            inclusions: vec![cube([-1.0, -0.2, 0.0], [-0.6, 0.2, 0.4]), cube([0.6, -0.2, 0.0], [1.0, 0.2, 0.4])],
            mode: Mode::Backscatter,
            ..Self::cube()
        }
    }

    /// No inclusion at all.
    pub fn homogeneous() -> Self {
        Self { scenario: "homogeneous".into(), inclusions: Vec::new(), noise: 0.0, ..Self::cube() }
    }

    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "cube" => Self::cube(),
            "cube_backscatter" => Self { scenario: name.into(), mode: Mode::Backscatter, ..Self::cube() },
            "two_cubes" => Self::two_cubes(),
            "homogeneous" => Self::homogeneous(),
            other => bail!("unknown scenario preset {other:?}"),
        })
    }

    pub fn validate(&self) -> Result<()> {
        FrequencyGrid::new(self.k_bar, self.k_under, self.n)?;
        if !(self.noise >= 0.0) {
            bail!("noise level must be non-negative, got {}", self.noise);
        }
        if !(self.spacing > 0.0) {
            bail!("grid spacing must be positive, got {}", self.spacing);
        }
        if !(self.epsilon > 0.0) {
            bail!("epsilon must be positive, got {}", self.epsilon);
        }
        if (self.propagate_z - self.domain.min[2]).abs() > 1e-9 {
            bail!("data must be propagated to the bottom face z = {}, got {}", self.domain.min[2], self.propagate_z);
        }
        if self.plane.z >= self.propagate_z {
            bail!("the measurement plane must lie below the propagation plane");
        }
        self.plane.grid()?;
        Ok(())
    }

    pub fn freqs(&self) -> Result<FrequencyGrid> {
        Ok(FrequencyGrid::new(self.k_bar, self.k_under, self.n)?)
    }

    pub fn grid(&self) -> Result<Grid3> {
        Ok(Grid3::covering(&self.domain, self.spacing)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing the run configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}
