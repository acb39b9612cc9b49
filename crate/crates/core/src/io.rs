//! Snapshot files and the diagnostics CSV.
//!
//! A snapshot `<stem>` is a JSON header `<stem>.json` plus one raw file
//! `<stem>.<component>.f64` per component (`Q11`, `Q12`, … then `u`), each
//! holding little-endian `f64` values in row-major node order, axis order
//! (x, y, z), last axis fastest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::ModelParams;
use crate::error::{Error, Result};
use crate::fields::{GridFunction, PeriodicGrid, QTensorField, ScalarField};
use crate::stepper::{SimState, StepReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub d: usize,
    #[serde(rename = "J")]
    pub nodes: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub components: Vec<String>,
    pub time: f64,
    pub step: usize,
    pub s: f64,
    pub seed: u64,
    pub layout: String,
}

const LAYOUT: &str = "row-major (x, y, z), last axis fastest, little-endian f64";

fn component_path(header: &Path, name: &str) -> PathBuf {
    let stem = header.with_extension("");
    let mut os = stem.into_os_string();
    os.push(format!(".{name}.f64"));
    PathBuf::from(os)
}

fn write_raw(path: &Path, f: &ScalarField) -> Result<()> {
    let mut bytes = Vec::with_capacity(f.data.len() * 8);
    for v in &f.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_raw(path: &Path, grid: PeriodicGrid) -> Result<ScalarField> {
    let bytes = fs::read(path)?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::Snapshot(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            grid.len() * 8
        )));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    ScalarField::from_vec(grid, data)
}

/// Writes `<dir>/<stem>.json` and the component files; returns the header path.
pub fn write_snapshot(dir: &Path, stem: &str, state: &SimState, seed: u64) -> Result<PathBuf> {
    let grid = *state.grid();
    let mut components: Vec<String> = QTensorField::component_names(grid.dim()).iter().map(|s| s.to_string()).collect();
    components.push("u".to_string());
    let header = SnapshotHeader {
        d: grid.dim(),
        nodes: grid.nodes_per_axis(),
        length: grid.length(),
        components: components.clone(),
        time: state.t(),
        step: state.step(),
        s: state.s(),
        seed,
        layout: LAYOUT.to_string(),
    };
    let path = dir.join(format!("{stem}.json"));
    let fields = state.q().components().iter().chain(std::iter::once(state.u()));
    for (name, f) in components.iter().zip(fields) {
        write_raw(&component_path(&path, name), f)?;
    }
    let json = serde_json::to_string_pretty(&header).map_err(|e| Error::Snapshot(e.to_string()))?;
    fs::write(&path, json + "\n")?;
    Ok(path)
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub q: QTensorField,
    pub u: ScalarField,
}

impl Snapshot {
    /// Restart state; the parameters must match the stored dimension.
    pub fn into_state(self, p: &ModelParams) -> Result<SimState> {
        SimState::at(self.q, self.u, self.header.s, self.header.time, self.header.step, p)
    }
}

pub fn read_snapshot(header_path: &Path) -> Result<Snapshot> {
    let text = fs::read_to_string(header_path)?;
    let header: SnapshotHeader =
        serde_json::from_str(&text).map_err(|e| Error::Snapshot(format!("{}: {e}", header_path.display())))?;
    let grid = PeriodicGrid::new(header.d, header.nodes, header.length)
        .map_err(|e| Error::Snapshot(format!("bad grid in header: {e}")))?;
    let names = QTensorField::component_names(grid.dim());
    let expected: Vec<&str> = names.iter().copied().chain(["u"]).collect();
    if header.components != expected {
        return Err(Error::Snapshot(format!("components {:?}, expected {expected:?}", header.components)));
    }
    let q = names.iter().map(|n| read_raw(&component_path(header_path, n), grid)).collect::<Result<Vec<_>>>()?;
    let u = read_raw(&component_path(header_path, "u"), grid)?;
    Ok(Snapshot { q: QTensorField::from_components(grid, q)?, u, header })
}

pub const DIAGNOSTICS_HEADER: &str = "step,t,tau,E0,E1h,s,s_tilde,xi,g,R,modified_energy,max_abs_Q_F,max_abs_u";

/// Diagnostics CSV, one row per step plus a row for the starting state.
pub struct Diagnostics<W: Write> {
    out: W,
}

impl<W: Write> Diagnostics<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{DIAGNOSTICS_HEADER}")?;
        Ok(Diagnostics { out })
    }

    /// Starting state: the step-dependent columns are left blank.
    pub fn initial(&mut self, state: &SimState, tau: f64) -> Result<()> {
        writeln!(
            self.out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},,,,,{:.16e},{:.16e},{:.16e}",
            state.step(),
            state.t(),
            tau,
            state.e0(),
            state.e1h(),
            state.s(),
            state.modified_energy(),
            state.max_abs_q(),
            state.u().max_abs()
        )?;
        Ok(())
    }

    pub fn row(&mut self, r: &StepReport) -> Result<()> {
        writeln!(
            self.out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.step,
            r.t,
            r.tau,
            r.e0,
            r.e1h,
            r.s,
            r.s_tilde,
            r.xi,
            r.g,
            r.r,
            r.energy_after,
            r.max_abs_q_f,
            r.max_abs_u
        )?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
