//! Binary volume (`.vol3`) and measurement (`.mset`) files.
//!
//! Both start with one ASCII header line followed by little-endian `f64`
//! payload. Floats in headers use Rust's shortest round-trip formatting so a
//! write/read cycle is bit-exact.

use crate::error::{Error, Result};
use crate::field::{RealField3, ScalarField3, C64};
use crate::freq::FrequencyGrid;
use crate::grid::Grid3;
use crate::measurement::MeasurementSet;
use crate::plane::{PlaneField, PlaneGrid};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Contents of a `.vol3` file.
#[derive(Debug, Clone, PartialEq)]
pub enum Volume {
    Complex(ScalarField3),
    Real(RealField3),
}

impl Volume {
    pub fn grid(&self) -> &Grid3 {
        match self {
            Volume::Complex(f) => f.grid(),
            Volume::Real(f) => f.grid(),
        }
    }
}

fn read_header(r: &mut impl BufRead) -> Result<Vec<String>> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("missing header line".into()));
    }
    let text = std::str::from_utf8(&line).map_err(|_| Error::Format("header is not ASCII".into()))?;
    Ok(text.split_whitespace().map(str::to_owned).collect())
}

fn parse<T: std::str::FromStr>(tok: Option<&String>, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::Format(format!("header ends before {what}")))?
        .parse()
        .map_err(|_| Error::Format(format!("cannot parse {what}")))
}

fn write_f64s(w: &mut impl Write, values: impl Iterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("payload is truncated".into()),
        _ => Error::Io(e),
    })?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn read_complex(r: &mut impl Read, n: usize) -> Result<Vec<C64>> {
    Ok(read_f64s(r, 2 * n)?.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
}

fn expect_eof(r: &mut impl Read) -> Result<()> {
    let mut extra = [0u8; 1];
    match r.read(&mut extra)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}

pub fn write_vol3(w: &mut impl Write, vol: &Volume) -> Result<()> {
    let g = vol.grid();
    let kind = match vol {
        Volume::Complex(_) => "complex",
        Volume::Real(_) => "real",
    };
    writeln!(
        w,
        "VOL3 1 {} {} {} {} {} {} {} {} {} {kind}",
        g.dims[0], g.dims[1], g.dims[2], g.origin[0], g.origin[1], g.origin[2], g.spacing[0], g.spacing[1], g.spacing[2]
    )?;
    match vol {
        Volume::Complex(f) => write_f64s(w, f.values().iter().flat_map(|c| [c.re, c.im])),
        Volume::Real(f) => write_f64s(w, f.values().iter().copied()),
    }
}

pub fn read_vol3(r: &mut impl BufRead) -> Result<Volume> {
    let h = read_header(r)?;
    if h.len() != 12 || h[0] != "VOL3" || h[1] != "1" {
        return Err(Error::Format("not a version-1 VOL3 header".into()));
    }
    let mut it = h.iter().skip(2);
    let dims = [parse(it.next(), "nx")?, parse(it.next(), "ny")?, parse(it.next(), "nz")?];
    let origin = [parse(it.next(), "ox")?, parse(it.next(), "oy")?, parse(it.next(), "oz")?];
    let spacing = [parse(it.next(), "sx")?, parse(it.next(), "sy")?, parse(it.next(), "sz")?];
    let grid = Grid3::new(origin, spacing, dims).map_err(|e| Error::Format(e.to_string()))?;
    let vol = match h[11].as_str() {
        "complex" => Volume::Complex(ScalarField3::new(grid, read_complex(r, grid.len())?)?),
        "real" => Volume::Real(RealField3::new(grid, read_f64s(r, grid.len())?)?),
        other => return Err(Error::Format(format!("unknown value kind {other:?}"))),
    };
    expect_eof(r)?;
    Ok(vol)
}

pub fn write_mset(w: &mut impl Write, m: &MeasurementSet) -> Result<()> {
    let f = m.freqs();
    let p = m.plane();
    write!(w, "MSET 1 {} {}", f.n() + 1, f.h())?;
    for s in m.samples() {
        write!(w, " {}", s.k())?;
    }
    writeln!(w, " {} {} {} {} {} {} {}", p.z, p.nx, p.ny, p.x0, p.y0, p.dx, p.dy)?;
    for s in m.samples() {
        write_f64s(w, s.values().iter().flat_map(|c| [c.re, c.im]))?;
    }
    Ok(())
}

pub fn read_mset(r: &mut impl BufRead) -> Result<MeasurementSet> {
    let h = read_header(r)?;
    if h.len() < 4 || h[0] != "MSET" || h[1] != "1" {
        return Err(Error::Format("not a version-1 MSET header".into()));
    }
    let count: usize = parse(h.get(2), "frequency count")?;
    if count < 2 || h.len() != 4 + count + 7 {
        return Err(Error::Format("MSET header has the wrong number of fields".into()));
    }
    let step: f64 = parse(h.get(3), "h")?;
    let ks = (0..count).map(|n| parse(h.get(4 + n), "wavenumber")).collect::<Result<Vec<f64>>>()?;
    let freqs = FrequencyGrid::from_list(&ks).map_err(|e| Error::Format(e.to_string()))?;
    if (freqs.h() - step).abs() > 1e-12 {
        return Err(Error::Format(format!("step {step} inconsistent with the wavenumber list")));
    }
    let mut it = h.iter().skip(4 + count);
    let plane = PlaneGrid::new(
        parse(it.next(), "plane z")?,
        parse(it.next(), "nx")?,
        parse(it.next(), "ny")?,
        parse(it.next(), "x0")?,
        parse(it.next(), "y0")?,
        parse(it.next(), "dx")?,
        parse(it.next(), "dy")?,
    )
    .map_err(|e| Error::Format(e.to_string()))?;
    let mut samples = Vec::with_capacity(count);
    for &k in &ks {
        samples.push(PlaneField::new(plane, k, read_complex(r, plane.len())?)?);
    }
    expect_eof(r)?;
    MeasurementSet::new(freqs, samples, None)
}

pub fn save_vol3(path: impl AsRef<Path>, vol: &Volume) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vol3(&mut w, vol)?;
    w.flush()?;
    Ok(())
}

pub fn load_vol3(path: impl AsRef<Path>) -> Result<Volume> {
    read_vol3(&mut BufReader::new(File::open(path)?))
}

pub fn save_mset(path: impl AsRef<Path>, m: &MeasurementSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mset(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_mset(path: impl AsRef<Path>) -> Result<MeasurementSet> {
    read_mset(&mut BufReader::new(File::open(path)?))
}
