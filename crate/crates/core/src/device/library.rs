//! Device-library generation and its plain-text file format.
//!
//! The file holds one block per device:
//!
//! ```text
//! device,<device_id>,<delta_theta>,<seed>,<slope>,<stuck>
//! pulse_index,R_H_forward,R_H_backward,x_forward,x_backward
//! 0,-195,195,92.4,1907.1
//! 1,-188.2,190.4,101.7,1899.0
//! ...
//! ```
//!
//! Lines starting with `#` are comments. The two staircases may differ in
//! length; missing cells are left empty. Floats are written in shortest
//! round-trip form, so reading a file back reproduces every value exactly.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;

use super::trace::{record_response_trace, DeviceResponseTrace};
use crate::error::{Error, Result};
use crate::micromag::{generate_voronoi_grains, DriveSpec, MaterialParams, SolverSettings, WireGeometry, WireModel};

/// What to generate: `count` devices at one disorder level, device k using
/// grain seed `seed_base + k`.
#[derive(Clone, Debug)]
pub struct LibrarySpec {
    pub count: usize,
    pub delta_theta: f64,
    pub seed_base: u64,
    pub mean_grain_diameter: f64,
    pub geometry: WireGeometry,
    pub params: MaterialParams,
    pub drive: DriveSpec,
    pub settings: SolverSettings,
}

impl Default for LibrarySpec {
    fn default() -> Self {
        Self {
            count: 30,
            delta_theta: 8.0,
            seed_base: 1000,
            mean_grain_diameter: 10.0,
            geometry: WireGeometry::default(),
            params: MaterialParams::default(),
            drive: DriveSpec::default(),
            settings: SolverSettings::default(),
        }
    }
}

/// Records both staircases for every device in parallel. Stuck devices are
/// kept and flagged, not dropped.
pub fn generate_device_library(spec: &LibrarySpec) -> Result<Vec<DeviceResponseTrace>> {
    (0..spec.count)
        .into_par_iter()
        .map(|id| {
            let seed = spec.seed_base + id as u64;
            let grains = generate_voronoi_grains(&spec.geometry, spec.mean_grain_diameter, spec.delta_theta, seed)?;
            let model = WireModel::new(spec.geometry.clone(), spec.params.clone(), grains)?;
            let trace = record_response_trace(Arc::new(model), &spec.drive, &spec.settings, id, seed, false)?;
            if trace.stuck {
                log::warn!("device {id} (seed {seed}) did not saturate within its pulse budget");
            }
            Ok(trace)
        })
        .collect()
}

const ROW_HEADER: &str = "pulse_index,R_H_forward,R_H_backward,x_forward,x_backward";

fn cell(v: Option<&f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_library<W: Write>(traces: &[DeviceResponseTrace], mut out: W) -> Result<()> {
    writeln!(out, "# device,device_id,delta_theta,seed,slope,stuck")?;
    for t in traces {
        writeln!(
            out,
            "device,{},{},{},{},{}",
            t.device_id, t.delta_theta, t.seed, t.slope, t.stuck
        )?;
        writeln!(out, "{ROW_HEADER}")?;
        let n = t.forward.len().max(t.backward.len());
        for k in 0..n {
            writeln!(
                out,
                "{k},{},{},{},{}",
                cell(t.forward.get(k)),
                cell(t.backward.get(k)),
                cell(t.forward_x.get(k)),
                cell(t.backward_x.get(k))
            )?;
        }
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::MalformedTable(format!("line {line}: cannot parse {s:?}")))
}

fn push_opt(v: &mut Vec<f64>, s: &str, line: usize) -> Result<()> {
    if !s.trim().is_empty() {
        v.push(parse(s, line)?);
    }
    Ok(())
}

pub fn read_library<R: BufRead>(input: R) -> Result<Vec<DeviceResponseTrace>> {
    let mut out: Vec<DeviceResponseTrace> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') || text == ROW_HEADER {
            continue;
        }
        let f: Vec<&str> = text.split(',').collect();
        if f[0] == "device" {
            if f.len() != 6 {
                return Err(Error::MalformedTable(format!("line {lineno}: device record needs 6 fields")));
            }
            out.push(DeviceResponseTrace {
                device_id: parse(f[1], lineno)?,
                delta_theta: parse(f[2], lineno)?,
                seed: parse(f[3], lineno)?,
                slope: parse(f[4], lineno)?,
                stuck: parse(f[5], lineno)?,
                forward: Vec::new(),
                backward: Vec::new(),
                forward_x: Vec::new(),
                backward_x: Vec::new(),
            });
            continue;
        }
        let t = out
            .last_mut()
            .ok_or_else(|| Error::MalformedTable(format!("line {lineno}: row before any device record")))?;
        if f.len() != 5 {
            return Err(Error::MalformedTable(format!("line {lineno}: expected 5 fields, got {}", f.len())));
        }
        let k: usize = parse(f[0], lineno)?;
        if k != t.forward.len().max(t.backward.len()) {
            return Err(Error::MalformedTable(format!("line {lineno}: pulse index {k} out of sequence")));
        }
        push_opt(&mut t.forward, f[1], lineno)?;
        push_opt(&mut t.backward, f[2], lineno)?;
        push_opt(&mut t.forward_x, f[3], lineno)?;
        push_opt(&mut t.backward_x, f[4], lineno)?;
    }
    for t in &out {
        if t.forward.is_empty() || t.backward.is_empty() {
            return Err(Error::MalformedTable(format!("device {} has an empty staircase", t.device_id)));
        }
    }
    Ok(out)
}
