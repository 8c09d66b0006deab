//! The `gcm` binary on small, fast configurations.

use gcm_cli::config::{Mode, PlaneSpec, RunConfig};
use gcm_cli::{COEFFICIENT_FILE, CONFIG_ECHO_FILE, MEASUREMENTS_FILE, PROPAGATED_FILE, REPORT_FILE, SLICE_FILE, TARGETS_FILE};
use gcm_core::{Aabb, Inclusion};
use std::path::Path;
use std::process::{Command, Output};

/// A 11x11x11 box with three wavenumbers and a 16x16 measurement plane.
fn small(inclusions: Vec<Inclusion>) -> RunConfig {
    RunConfig {
        scenario: "small".into(),
        inclusions,
        n: 2,
        spacing: 0.2,
        domain: Aabb::new([-1.0, -1.0, -0.75], [1.0, 1.0, 1.25]),
        plane: PlaneSpec { z: -3.0, x: (-2.0, 2.0), y: (-2.0, 2.0), nx: 16, ny: 16 },
        mode: Mode::Backscatter,
        ..RunConfig::cube()
    }
}

fn gcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcm")).args(args).env("RUST_LOG", "warn").output().expect("spawning gcm")
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn homogeneous_run_writes_every_artefact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Vec::new());
    let config = write_config(dir.path(), &cfg);
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();
    for cmd in ["simulate", "propagate", "reconstruct"] {
        ok(&gcm(&[cmd, "--config", &config, "--out", out_s]));
    }
    for f in [CONFIG_ECHO_FILE, MEASUREMENTS_FILE, PROPAGATED_FILE, TARGETS_FILE, COEFFICIENT_FILE, REPORT_FILE, SLICE_FILE] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let echoed = RunConfig::load(out.join(CONFIG_ECHO_FILE)).unwrap();
    assert_eq!(echoed.to_toml().unwrap(), cfg.to_toml().unwrap());

    let report = gcm(&["report", "--out", out_s]);
    ok(&report);
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("scenario small"), "{text}");
    assert!(text.contains("no target located"), "{text}");
}

#[test]
fn simulation_is_deterministic_in_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(vec![Inclusion::new(Aabb::new([-0.2, -0.2, 0.0], [0.2, 0.2, 0.4]), 3.0)]);
    let config = write_config(dir.path(), &cfg);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&gcm(&["simulate", "--config", &config, "--seed", seed, "--out", out.to_str().unwrap()]));
        std::fs::read(out.join(MEASUREMENTS_FILE)).unwrap()
    };
    let a = run("a", "7");
    assert_eq!(a, run("b", "7"));
    assert_ne!(a, run("c", "8"));
}

#[test]
fn report_without_a_run_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcm(&["report", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(REPORT_FILE));
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(!gcm(&["simulate", "--scenario", "nonexistent", "--out", "/nonexistent/x"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "unknown_key = 3\n").unwrap();
    let out = gcm(&["simulate", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn shipped_configs_match_the_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["cube", "cube_backscatter", "two_cubes", "homogeneous"] {
        let cfg = RunConfig::load(dir.join(format!("{name}.toml"))).unwrap();
        assert_eq!(cfg.to_toml().unwrap(), RunConfig::preset(name).unwrap().to_toml().unwrap(), "{name}");
    }
}
