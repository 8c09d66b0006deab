//! File-level commands behind the `gcm` binary.

pub mod config;
pub mod pipeline;

use anyhow::{bail, Context, Result};
use config::{Mode, RunConfig};
use gcm_core::gcm::OuterRecord;
use gcm_core::{
    load_mset, save_mset, save_vol3, simulate, Inclusion, ReconstructionResult, RealField3, StopReason,
    TargetRegion, Volume,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const MEASUREMENTS_FILE: &str = "measurements.mset";
pub const PROPAGATED_FILE: &str = "propagated.mset";
pub const TARGETS_FILE: &str = "targets.json";
pub const PROPAGATION_FILE: &str = "propagation.json";
pub const COEFFICIENT_FILE: &str = "c_comp.vol3";
pub const REPORT_FILE: &str = "report.json";
pub const SLICE_FILE: &str = "slice_y0.csv";
pub const CONFIG_ECHO_FILE: &str = "config.toml";

/// Summary of the propagation step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropagationSummary {
    pub locate_k: f64,
    pub components: usize,
    pub edge_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub component: usize,
    pub c_max: f64,
    pub argmax: [f64; 3],
    pub centroid: [f64; 3],
    /// Value and centre of the inclusion matched to this component.
    pub true_value: Option<f64>,
    pub true_center: Option<[f64; 3]>,
    pub relative_error: Option<f64>,
    pub centroid_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub mode: Mode,
    pub stop: StopReason,
    pub outer_iterations: usize,
    pub c0_max: f64,
    pub c_max: f64,
    pub targets: Vec<TargetReport>,
    pub averaged: Vec<(usize, usize)>,
    pub seconds: f64,
    pub log: Vec<OuterRecord>,
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

/// The inclusion whose footprint centre falls in `component`, else the one
/// closest to `centroid`.
fn matched_inclusion<'a>(inclusions: &'a [Inclusion], region: &TargetRegion, component: usize, centroid: [f64; 3]) -> Option<&'a Inclusion> {
    inclusions
        .iter()
        .find(|inc| {
            let c = inc.region.center();
            region.component_at(c[0], c[1]) == Some(component)
        })
        .or_else(|| {
            inclusions.iter().min_by(|a, b| {
                distance(a.region.center(), centroid).total_cmp(&distance(b.region.center(), centroid))
            })
        })
}

impl Report {
    pub fn new(cfg: &RunConfig, region: &TargetRegion, result: &ReconstructionResult) -> Self {
        let targets = result
            .targets
            .iter()
            .map(|t| {
                let inc = matched_inclusion(&cfg.inclusions, region, t.component, t.centroid);
                TargetReport {
                    component: t.component,
                    c_max: t.c_max,
                    argmax: t.argmax,
                    centroid: t.centroid,
                    true_value: inc.map(|i| i.value),
                    true_center: inc.map(|i| i.region.center()),
                    relative_error: inc.map(|i| (t.c_max - i.value).abs() / i.value),
                    centroid_error: inc.map(|i| distance(t.centroid, i.region.center())),
                }
            })
            .collect();
        Self {
            scenario: cfg.scenario.clone(),
            mode: cfg.mode,
            stop: result.stop,
            outer_iterations: result.outer_iterations(),
            c0_max: result.c0_max,
            c_max: result.c_max(),
            targets,
            averaged: result.averaged.clone(),
            seconds: result.seconds,
            log: result.log.clone(),
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario {} ({:?} mode)", self.scenario, self.mode);
        let _ = writeln!(
            s,
            "stop {:?} after {} outer iterations, {:.1} s; c0 max {:.4}, c_comp max {:.4}",
            self.stop, self.outer_iterations, self.seconds, self.c0_max, self.c_max
        );
        if self.targets.is_empty() {
            let _ = writeln!(s, "no target located");
        }
        for t in &self.targets {
            let _ = write!(
                s,
                "target {}: c_max {:.4} at ({:.3}, {:.3}, {:.3}), centroid ({:.3}, {:.3}, {:.3})",
                t.component, t.c_max, t.argmax[0], t.argmax[1], t.argmax[2], t.centroid[0], t.centroid[1], t.centroid[2]
            );
            if let (Some(v), Some(e), Some(d)) = (t.true_value, t.relative_error, t.centroid_error) {
                let _ = write!(s, "; true {v}, error {:.1}%, centroid off by {d:.3}", 100.0 * e);
            }
            s.push('\n');
        }
        let _ = writeln!(s, "averaged iterates {:?}", self.averaged);
        let _ = writeln!(s, "{:>3} {:>3} {:>8} {:>12} {:>6} {:>6} {:>10}", "n", "i", "k", "error", "q_it", "ls_it", "c_max");
        for rec in &self.log {
            if let Some(b) = rec.bridge_error {
                let _ = writeln!(s, "{:>3} {:>3} {:>8.4} {:>12.3e}", rec.n, "~1", rec.k, b);
            }
            for inner in &rec.inner {
                let err = inner.error.map(|e| format!("{e:.3e}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    s,
                    "{:>3} {:>3} {:>8.4} {:>12} {:>6} {:>6} {:>10.4}",
                    rec.n, inner.i, rec.k, err, inner.q_iterations, inner.ls_iterations, inner.c_max
                );
            }
        }
        s
    }
}

/// `x,z,c` rows of the node plane closest to `y = 0`.
pub fn slice_csv(c: &RealField3) -> String {
    let g = *c.grid();
    let j = g.nearest_index(1, 0.0).unwrap_or(g.dims[1] / 2);
    let mut s = String::from("x,z,c\n");
    for k in 0..g.dims[2] {
        for i in 0..g.dims[0] {
            let _ = writeln!(s, "{},{},{}", g.coord(0, i), g.coord(2, k), c.values()[g.index(i, j, k)]);
        }
    }
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(value)?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn prepare(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join(CONFIG_ECHO_FILE), &cfg.to_toml()?)
}

/// Synthesise noisy measurements and write them to `out`.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    prepare(cfg, out)?;
    let sim = pipeline::simulate_scene(cfg)?;
    save_mset(out.join(MEASUREMENTS_FILE), &sim.noisy)?;
    log::info!("wrote {} wavenumbers to {}", sim.noisy.freqs().ks().len(), out.join(MEASUREMENTS_FILE).display());
    Ok(())
}

/// Propagate measurements to the bottom face and locate the targets.
pub fn cmd_propagate(cfg: &RunConfig, input: &Path, out: &Path) -> Result<PropagationSummary> {
    prepare(cfg, out)?;
    let m = load_mset(input)?;
    let p = pipeline::propagate_scene(cfg, &m)?;
    save_mset(out.join(PROPAGATED_FILE), &p.set)?;
    write_json(&out.join(TARGETS_FILE), &p.region)?;
    let summary = PropagationSummary { locate_k: p.locate_field.k(), components: p.region.components.len(), edge_ratio: p.edge_ratio };
    write_json(&out.join(PROPAGATION_FILE), &summary)?;
    if p.edge_ratio > 0.1 {
        log::warn!("scattered field at the aperture edge is {:.0}% of its peak; expect truncation artefacts", 100.0 * p.edge_ratio);
    }
    log::info!("located {} target component(s)", summary.components);
    Ok(summary)
}

/// Reconstruct from propagated data and write the coefficient and report.
pub fn cmd_reconstruct(cfg: &RunConfig, input: &Path, targets: &Path, out: &Path) -> Result<Report> {
    prepare(cfg, out)?;
    let propagated = load_mset(input)?;
    let region: TargetRegion = read_json::<TargetRegion>(targets)?.reindexed()?;
    let fields = match cfg.mode {
        Mode::Complete => {
            let truth = pipeline::truth(cfg)?;
            Some(simulate(&truth, propagated.freqs(), &cfg.plane.grid()?, &cfg.ls)?.fields)
        }
        Mode::Backscatter => None,
    };
    let data = pipeline::assemble_boundary_data(cfg, &propagated, fields.as_deref())?;
    let result = pipeline::reconstruct_scene(cfg, &data, &region)?;
    let report = Report::new(cfg, &region, &result);
    save_vol3(out.join(COEFFICIENT_FILE), &Volume::Real(result.c_comp.clone()))?;
    write_text(&out.join(SLICE_FILE), &slice_csv(&result.c_comp))?;
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// Render the report of a finished run in `dir`.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let path = dir.join(REPORT_FILE);
    if !path.exists() {
        bail!("{} not found; run `gcm reconstruct` first", path.display());
    }
    let report: Report = read_json(&path)?;
    let mut text = report.render();
    let prop = dir.join(PROPAGATION_FILE);
    if prop.exists() {
        let p: PropagationSummary = read_json(&prop)?;
        let _ = writeln!(text, "targets located at k = {:.4}; aperture edge ratio {:.3}", p.locate_k, p.edge_ratio);
    }
    Ok(text)
}
