use std::sync::Arc;

use crate::error::{Error, Result};
use crate::micromag::{
    apply_bounded_pulse, clip_hall, hall_resistance_raw, init_domain_wall, wall_position, DriveSpec,
    Integrator, SolverSettings, SpinField, WireModel, HALL_CLIP,
};

/// Staircases of Hall resistance versus pulse count for one device.
///
/// `forward[k]` is R_H (mΩ) after k pulses from the left-saturated start,
/// `backward[k]` likewise from the right-saturated start with reversed
/// current. The matching `*_x` vectors hold wall positions in nm.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceResponseTrace {
    pub device_id: usize,
    pub delta_theta: f64,
    pub seed: u64,
    pub slope: f64,
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
    pub forward_x: Vec<f64>,
    pub backward_x: Vec<f64>,
    /// Set when a sweep ran out of pulse budget before saturating.
    pub stuck: bool,
}

impl DeviceResponseTrace {
    /// Pulses needed to cross the full range in each direction.
    pub fn pulse_counts(&self) -> (usize, usize) {
        (self.forward.len() - 1, self.backward.len() - 1)
    }

    /// Wall position (nm) after `k` forward pulses; a sweep that already
    /// saturated stays at its final position.
    pub fn forward_position(&self, k: usize) -> f64 {
        self.forward_x[k.min(self.forward_x.len() - 1)]
    }

    /// Wall position (nm) after `k` backward pulses.
    pub fn backward_position(&self, k: usize) -> f64 {
        self.backward_x[k.min(self.backward_x.len() - 1)]
    }

    /// Fit residuals of the forward staircase about the calibrated line.
    pub fn forward_residuals(&self) -> Vec<f64> {
        let n = self.forward.len() as f64;
        let mean_k = (n - 1.0) / 2.0;
        let mean_r = self.forward.iter().sum::<f64>() / n;
        self.forward
            .iter()
            .enumerate()
            .map(|(k, r)| r - (mean_r + self.slope * (k as f64 - mean_k)))
            .collect()
    }
}

/// A simulated wire plus its current magnetization state.
#[derive(Clone, Debug)]
pub struct WireDevice {
    pub model: Arc<WireModel>,
    pub field: SpinField,
    pub settings: SolverSettings,
}

impl WireDevice {
    /// Wire with the wall parked just past the −195 mΩ reading (left end),
    /// up domain on the left so positive current raises the reading.
    pub fn left_saturated(model: Arc<WireModel>, settings: &SolverSettings) -> Result<Self> {
        Self::saturated(model, settings, -1.0)
    }

    /// Wall parked just past the +195 mΩ reading (right end).
    pub fn right_saturated(model: Arc<WireModel>, settings: &SolverSettings) -> Result<Self> {
        Self::saturated(model, settings, 1.0)
    }

    fn saturated(model: Arc<WireModel>, settings: &SolverSettings, side: f64) -> Result<Self> {
        let mut x = boundary_position(&model, side);
        let half = 0.5 * model.geometry.length;
        // keep the whole wall profile inside the wire
        let edge = (3.0 * model.params.wall_width() * 1e9).min(half);
        let (lo, hi) = (edge, model.geometry.length - edge);
        let mut field = init_domain_wall(&model, x, true, settings)?;
        // grain tilts shave a little off |⟨m_z⟩|; nudge the wall outward
        for _ in 0..4 {
            let deficit = HALL_CLIP - side * hall_resistance_raw(&field, &model.params);
            if deficit <= 0.0 || x <= lo || x >= hi {
                break;
            }
            x = (x + side * (deficit / model.params.hall_r_max * half + 1.0)).clamp(lo, hi);
            field = init_domain_wall(&model, x, true, settings)?;
        }
        Ok(Self {
            model,
            field,
            settings: settings.clone(),
        })
    }

    /// Hall reading, mΩ, clipped to ±195.
    pub fn resistance(&self) -> f64 {
        clip_hall(hall_resistance_raw(&self.field, &self.model.params))
    }

    pub fn wall_x(&self) -> f64 {
        wall_position(&self.field, &self.model.geometry).unwrap_or(f64::NAN)
    }

    /// Applies `count` identical pulses, stopping at the readout boundary.
    /// Returns the number of pulses delivered before the boundary was hit.
    pub fn pulse(&mut self, drive: &DriveSpec, count: usize) -> Result<usize> {
        let model = Arc::clone(&self.model);
        let mut integ = Integrator::new(&model, &self.settings)?;
        for k in 0..count {
            if apply_bounded_pulse(&mut integ, &mut self.field, &model, drive)? {
                return Ok(k + 1);
            }
        }
        Ok(count)
    }

    /// Like [`pulse`](Self::pulse) for a single pulse; true if the boundary
    /// was reached.
    pub fn pulse_once(&mut self, drive: &DriveSpec) -> Result<bool> {
        let model = Arc::clone(&self.model);
        let mut integ = Integrator::new(&model, &self.settings)?;
        apply_bounded_pulse(&mut integ, &mut self.field, &model, drive)
    }
}

/// Wall position (nm) at which an ideal two-domain wire reads ±195 mΩ.
fn boundary_position(model: &WireModel, side: f64) -> f64 {
    let mz = side * HALL_CLIP / model.params.hall_r_max;
    // up on the left: ⟨m_z⟩ = (2x − L)/L
    0.5 * model.geometry.length * (1.0 + mz)
}

/// A wall that moves less than `STALL_DISTANCE` nm on each of
/// `STALL_PULSES` consecutive identical pulses has reached a fixed point of
/// the pulse map and will not move again.
const STALL_PULSES: usize = 5;
const STALL_DISTANCE: f64 = 0.05;

fn sweep(
    device: &mut WireDevice,
    drive: &DriveSpec,
    budget: usize,
    target: f64,
) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    let mut r = vec![device.resistance()];
    let mut x = vec![device.wall_x()];
    let mut still = 0;
    for _ in 0..budget {
        let hit = device.pulse_once(drive)?;
        if hit {
            r.push(target);
            x.push(device.wall_x());
            return Ok((r, x, false));
        }
        let prev = *x.last().unwrap_or(&f64::NAN);
        r.push(device.resistance());
        x.push(device.wall_x());
        let now = *x.last().unwrap_or(&f64::NAN);
        still = if (now - prev).abs() < STALL_DISTANCE { still + 1 } else { 0 };
        if still >= STALL_PULSES {
            return Ok((r, x, true));
        }
    }
    Ok((r, x, true))
}

/// Sweeps pulses one at a time in each direction until the reading saturates,
/// recording R_H after every pulse and relaxation.
///
/// The pulse budget per direction is ten times the count a pinning-free wire
/// would need. A sweep that exhausts it, or whose wall stops moving
/// altogether, marks the trace `stuck`; the recorded staircase then ends at
/// the pinned reading. With `fail_on_stuck` that is returned as an error
/// instead.
pub fn record_response_trace(
    model: Arc<WireModel>,
    drive: &DriveSpec,
    settings: &SolverSettings,
    device_id: usize,
    seed: u64,
    fail_on_stuck: bool,
) -> Result<DeviceResponseTrace> {
    drive.validate()?;
    if drive.current_density <= 0.0 {
        return Err(Error::InvalidParameter("calibration drive must be positive".into()));
    }
    let budget = pulse_budget(&model, drive);
    let mut dev = WireDevice::left_saturated(Arc::clone(&model), settings)?;
    let (forward, forward_x, stuck_f) = sweep(&mut dev, drive, budget, HALL_CLIP)?;
    if stuck_f && fail_on_stuck {
        return Err(Error::StuckDevice {
            device_id,
            pulses: budget,
        });
    }
    let mut dev = WireDevice::right_saturated(Arc::clone(&model), settings)?;
    let (backward, backward_x, stuck_b) = sweep(&mut dev, &drive.reversed(), budget, -HALL_CLIP)?;
    if stuck_b && fail_on_stuck {
        return Err(Error::StuckDevice {
            device_id,
            pulses: budget,
        });
    }
    let mut trace = DeviceResponseTrace {
        device_id,
        delta_theta: model.grains.delta_theta,
        seed,
        slope: 0.0,
        forward,
        backward,
        forward_x,
        backward_x,
        stuck: stuck_f || stuck_b,
    };
    trace.slope = calibrate(&trace)?;
    Ok(trace)
}

fn pulse_budget(model: &WireModel, drive: &DriveSpec) -> usize {
    let span = model.geometry.length * HALL_CLIP / model.params.hall_r_max;
    let v = model.params.steady_velocity(drive.current_density).abs();
    // nm travelled per pulse by a free wall (m/s · ns = nm)
    let per_pulse = v * (drive.pulse_duration + drive.relax_duration).max(drive.pulse_duration);
    let expected = (span / per_pulse.max(1e-9)).ceil().max(1.0);
    (10.0 * expected) as usize
}

/// Least-squares slope (mΩ/pulse) of R_H against pulse count, pooling the
/// forward staircase with the negated backward staircase.
pub fn calibrate(trace: &DeviceResponseTrace) -> Result<f64> {
    let pts: Vec<(f64, f64)> = trace
        .forward
        .iter()
        .enumerate()
        .map(|(k, &r)| (k as f64, r))
        .chain(trace.backward.iter().enumerate().map(|(k, &r)| (k as f64, -r)))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("{} staircase points", pts.len())));
    }
    let n = pts.len() as f64;
    let mk = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mr = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(k, r)| (k - mk) * (r - mr)).sum();
    let sxx: f64 = pts.iter().map(|(k, _)| (k - mk).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all points at one pulse count".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn uniform_trace(step: f64) -> DeviceResponseTrace {
        let n = (2.0 * HALL_CLIP / step).round() as usize;
        let forward: Vec<f64> = (0..=n).map(|k| -HALL_CLIP + step * k as f64).collect();
        let backward: Vec<f64> = forward.iter().map(|r| -r).collect();
        DeviceResponseTrace {
            device_id: 0,
            delta_theta: 0.0,
            seed: 0,
            slope: step,
            forward_x: vec![0.0; forward.len()],
            backward_x: vec![0.0; backward.len()],
            forward,
            backward,
            stuck: false,
        }
    }

    #[test]
    fn uniform_staircase_slope() {
        let t = uniform_trace(10.0);
        assert!((calibrate(&t).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn slope_matches_normal_equations() {
        let mut t = uniform_trace(13.0);
        t.forward = vec![-195.0, -180.0, -182.0, -120.0, -40.0, 60.0, 195.0];
        t.backward = vec![195.0, 100.0, 98.0, -195.0];
        // normal equations [Σk² Σk; Σk n][a b]ᵀ = [Σkr Σr]ᵀ, solved by Cramer's rule
        let pts: Vec<(f64, f64)> = t
            .forward
            .iter()
            .enumerate()
            .map(|(k, &r)| (k as f64, r))
            .chain(t.backward.iter().enumerate().map(|(k, &r)| (k as f64, -r)))
            .collect();
        let (mut s1, mut sk, mut skk, mut sr, mut skr) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, r) in &pts {
            s1 += 1.0;
            sk += k;
            skk += k * k;
            sr += r;
            skr += k * r;
        }
        let a = (s1 * skr - sk * sr) / (s1 * skk - sk * sk);
        assert!((calibrate(&t).unwrap() - a).abs() < 1e-9);
    }

    #[test]
    fn too_few_points() {
        let mut t = uniform_trace(10.0);
        t.forward = vec![-195.0];
        t.backward = vec![195.0];
        assert!(matches!(calibrate(&t), Err(Error::InsufficientData(_))));
    }
}
