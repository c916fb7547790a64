use std::sync::Arc;

use super::trace::{DeviceResponseTrace, WireDevice};
use super::{resistance_to_weight, Synapse, WEIGHT_SCALE};
use crate::error::{Error, Result};
use crate::micromag::DriveSpec;

/// Pulse count for a requested weight change: round to nearest, with
/// requests under half a pulse writing nothing.
pub fn pulses_for(requested: f64, slope: f64) -> usize {
    let n = requested.abs() * WEIGHT_SCALE / slope;
    if !n.is_finite() || n < 0.5 {
        0
    } else {
        n.round() as usize
    }
}

#[derive(Clone, Debug)]
enum Backend {
    Live(Box<WireDevice>),
    Surrogate {
        trace: Arc<DeviceResponseTrace>,
        rising: bool,
        index: usize,
    },
}

/// A domain-wall wire used as a weight, w = R_H / 195 mΩ.
#[derive(Clone, Debug)]
pub struct DomainWallSynapse {
    backend: Backend,
    slope: f64,
    drive: DriveSpec,
    device_id: usize,
    accumulate: bool,
    residue: f64,
}

fn nearest_index(staircase: &[f64], r: f64) -> usize {
    let mut best = 0;
    for (k, v) in staircase.iter().enumerate() {
        if (v - r).abs() < (staircase[best] - r).abs() {
            best = k;
        }
    }
    best
}

impl DomainWallSynapse {
    /// Synapse driven by the full micromagnetic simulation.
    pub fn live(device: WireDevice, slope: f64, drive: DriveSpec, device_id: usize) -> Result<Self> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(Error::InvalidParameter(format!("calibrated slope {slope} must be > 0")));
        }
        drive.validate()?;
        Ok(Self {
            backend: Backend::Live(Box::new(device)),
            slope,
            drive,
            device_id,
            accumulate: false,
            residue: 0.0,
        })
    }

    /// Synapse that replays a recorded trace: the forward staircase while
    /// moving right, the backward one while moving left, re-entering at the
    /// nearest recorded resistance whenever the direction changes. Starts at
    /// the left-saturated state.
    pub fn make_surrogate(trace: Arc<DeviceResponseTrace>, drive: DriveSpec) -> Self {
        Self {
            slope: trace.slope,
            device_id: trace.device_id,
            backend: Backend::Surrogate {
                trace,
                rising: true,
                index: 0,
            },
            drive,
            accumulate: false,
            residue: 0.0,
        }
    }

    /// With accumulation on, the part of each request that rounding left
    /// unwritten is carried into the next request. The carry is computed
    /// from the pulses sent and the calibrated slope, never from the reading,
    /// so pinning errors are not corrected.
    pub fn accumulating(mut self, on: bool) -> Self {
        self.accumulate = on;
        self.residue = 0.0;
        self
    }

    /// Request carried over from earlier writes.
    pub fn residue(&self) -> f64 {
        self.residue
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn device_id(&self) -> usize {
        self.device_id
    }

    pub fn drive(&self) -> &DriveSpec {
        &self.drive
    }

    pub fn is_surrogate(&self) -> bool {
        matches!(self.backend, Backend::Surrogate { .. })
    }

    /// Hall reading in mΩ, within ±195.
    pub fn resistance(&self) -> f64 {
        match &self.backend {
            Backend::Live(dev) => dev.resistance(),
            Backend::Surrogate { trace, rising, index } => {
                let r = if *rising {
                    trace.forward[*index]
                } else {
                    trace.backward[*index]
                };
                r.clamp(-WEIGHT_SCALE, WEIGHT_SCALE)
            }
        }
    }

    /// Applies `count` pulses with positive (rightward) or negative current.
    pub fn apply_pulses(&mut self, count: usize, positive: bool) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        let r_now = self.resistance();
        match &mut self.backend {
            Backend::Live(dev) => {
                let drive = if positive { self.drive.clone() } else { self.drive.reversed() };
                dev.pulse(&drive, count)?;
            }
            Backend::Surrogate { trace, rising, index } => {
                if *rising != positive {
                    let stair = if positive { &trace.forward } else { &trace.backward };
                    *index = nearest_index(stair, r_now);
                    *rising = positive;
                }
                let len = if positive { trace.forward.len() } else { trace.backward.len() };
                *index = (*index + count).min(len - 1);
            }
        }
        Ok(())
    }
}

impl Synapse for DomainWallSynapse {
    fn read_weight(&self) -> f64 {
        resistance_to_weight(self.resistance())
    }

    fn write_delta(&mut self, requested: f64) -> Result<f64> {
        let total = if self.accumulate { requested + self.residue } else { requested };
        let n = pulses_for(total, self.slope);
        if self.accumulate {
            self.residue = total - total.signum() * n as f64 * self.slope / WEIGHT_SCALE;
        }
        if n == 0 {
            return Ok(0.0);
        }
        let before = self.read_weight();
        self.apply_pulses(n, total > 0.0)?;
        Ok(self.read_weight() - before)
    }

    /// Closed-loop programming: repeated writes toward `target` until the
    /// remaining error is under half a pulse or a write stops helping.
    fn randomize_weight(&mut self, target: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&target) {
            return Err(Error::InvalidParameter(format!("target weight {target} outside [-1, 1]")));
        }
        let mut best = (self.read_weight() - target).abs();
        for _ in 0..16 {
            let err = target - self.read_weight();
            if pulses_for(err, self.slope) == 0 {
                break;
            }
            self.write_delta(err)?;
            let now = (self.read_weight() - target).abs();
            if now >= best {
                break;
            }
            best = now;
        }
        self.residue = 0.0;
        Ok(self.read_weight())
    }
}
