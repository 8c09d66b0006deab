//! The stages of a run, as library calls on in-memory data.

use crate::config::{Mode, RunConfig};
use anyhow::{Context, Result};
use gcm_core::preprocess::gamma_plane;
use gcm_core::{
    add_noise, build_coefficient, complete_boundary_data, default_inner_region, full_boundary_data, gamma_data,
    locate_targets, run_reconstruction, simulate, AngularSpectrum, BoundaryData, CoefficientField, MeasurementSet,
    PlaneField, ReconstructionResult, ScalarField3, TargetRegion, C64,
};

/// The true coefficient described by the configuration.
pub fn truth(cfg: &RunConfig) -> Result<CoefficientField> {
    let grid = cfg.grid()?;
    Ok(build_coefficient(&cfg.inclusions, &grid, &default_inner_region(&grid))?)
}

pub struct Simulated {
    /// Noise-free total field on the measurement plane.
    pub clean: MeasurementSet,
    /// Total field whose scattered part carries the configured noise.
    pub noisy: MeasurementSet,
    /// Total fields on the grid, one per wavenumber.
    pub fields: Vec<ScalarField3>,
}

fn incident(k: f64, z: f64) -> C64 {
    C64::from_polar(1.0, k * z)
}

/// The measurement set with the incident wave removed (`sign = -1`) or added back.
pub fn shift_incident(m: &MeasurementSet, sign: f64) -> Result<MeasurementSet> {
    Ok(m.try_map(|_, s| {
        let inc = incident(s.k(), s.z()) * sign;
        Ok(s.map(|v| v + inc))
    })?)
}

/// Forward-simulate the configured scene and perturb the scattered data.
pub fn simulate_scene(cfg: &RunConfig) -> Result<Simulated> {
    let c = truth(cfg)?;
    let sim = simulate(&c, &cfg.freqs()?, &cfg.plane.grid()?, &cfg.ls).context("forward simulation")?;
    let scattered = shift_incident(&sim.measurements, -1.0)?;
    let mut noisy = shift_incident(&add_noise(&scattered, cfg.noise, cfg.seed)?, 1.0)?;
    noisy.noise_level = Some(cfg.noise);
    Ok(Simulated { clean: sim.measurements, noisy, fields: sim.fields })
}

pub struct Propagated {
    /// Total field on the propagation plane over the full aperture.
    pub set: MeasurementSet,
    /// Scattered field at the localisation wavenumber on the face lattice of the box.
    pub locate_field: PlaneField,
    pub region: TargetRegion,
    /// `max |u_sc|` near the aperture edge over its peak, at the localisation wavenumber.
    pub edge_ratio: f64,
}

/// Move the scattered data to the bottom face of the box and locate targets.
pub fn propagate_scene(cfg: &RunConfig, m: &MeasurementSet) -> Result<Propagated> {
    let grid = cfg.grid()?;
    let scattered = shift_incident(m, -1.0)?;
    let n_loc = m.freqs().nearest(cfg.locate_k);
    let face = gamma_plane(&grid);
    let xs: Vec<f64> = (0..face.nx).map(|i| face.x(i)).collect();
    let ys: Vec<f64> = (0..face.ny).map(|j| face.y(j)).collect();
    let mut locate_field = None;
    let mut edge_ratio = 0.0;
    let set = scattered.try_map(|n, s| {
        let spec = AngularSpectrum::new(s, cfg.travel, gcm_core::propagate::DEFAULT_PAD_FACTOR)?;
        let moved = spec.field_at(cfg.propagate_z);
        if n == n_loc {
            locate_field = Some(PlaneField::new(face, s.k(), spec.sample(cfg.propagate_z, &xs, &ys, 0))?);
            let p = moved.grid();
            let peak = moved.max_abs();
            let half = 0.8 * (p.x(p.nx - 1) - p.x(0)) / 2.0;
            let (cx, cy) = ((p.x(0) + p.x(p.nx - 1)) / 2.0, (p.y(0) + p.y(p.ny - 1)) / 2.0);
            let edge = (0..p.len())
                .filter(|&idx| {
                    let q = p.point(idx);
                    (q[0] - cx).abs().max((q[1] - cy).abs()) > half
                })
                .map(|idx| moved.values()[idx].norm())
                .fold(0.0, f64::max);
            edge_ratio = if peak > 0.0 { edge / peak } else { 0.0 };
        }
        let inc = incident(s.k(), cfg.propagate_z);
        Ok(moved.map(|v| v + inc))
    })?;
    let locate_field = locate_field.expect("localisation wavenumber is on the grid");
    let region = locate_targets(&locate_field, cfg.threshold)?;
    if region.is_empty() {
        log::warn!("no target located; the reconstruction will return c = 1");
    }
    Ok(Propagated { set, locate_field, region, edge_ratio })
}

/// Dirichlet data for the configured mode. Complete mode needs the forward
/// fields of the true medium.
pub fn assemble_boundary_data(cfg: &RunConfig, propagated: &MeasurementSet, fields: Option<&[ScalarField3]>) -> Result<BoundaryData> {
    let grid = cfg.grid()?;
    let gamma = gamma_data(propagated, &grid, cfg.travel, cfg.epsilon).context("data on the measured face")?;
    let data = match cfg.mode {
        Mode::Complete => {
            let fields = fields.context("complete mode needs the simulated fields")?;
            full_boundary_data(fields, &gamma, propagated.freqs())?
        }
        Mode::Backscatter => complete_boundary_data(&gamma, propagated.freqs(), &grid)?,
    };
    Ok(data)
}

pub fn reconstruct_scene(cfg: &RunConfig, data: &BoundaryData, region: &TargetRegion) -> Result<ReconstructionResult> {
    Ok(run_reconstruction(data, region, None, &cfg.gcm).context("reconstruction")?)
}

/// Everything a full run produces.
pub struct RunOutput {
    pub simulated: Simulated,
    pub propagated: Propagated,
    pub result: ReconstructionResult,
}

/// Simulate, propagate and reconstruct in one go.
pub fn run_scene(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let simulated = simulate_scene(cfg)?;
    let propagated = propagate_scene(cfg, &simulated.noisy)?;
    let data = assemble_boundary_data(cfg, &propagated.set, Some(&simulated.fields))?;
    let result = reconstruct_scene(cfg, &data, &propagated.region)?;
    Ok(RunOutput { simulated, propagated, result })
}
