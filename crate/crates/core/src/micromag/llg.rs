//! Time integration of the LLG equation with spin-transfer torque, and an
//! energy minimizer for relaxation.

use std::ops::Range;

use super::field::{SpinField, WireModel};
use super::params::{DriftStencil, DriveSpec, SolverSettings};
use super::wall::wall_position;
use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Largest γ0·|H_eff|·dt accepted before integrating.
pub const STABILITY_LIMIT: f64 = 0.1;

/// Simulated time (ns) of current-free dynamics that relaxation may spend
/// getting out of stalled descents.
pub const RELAX_DYNAMICS_CAP: f64 = 20.0;

/// Explicit ṁ for the implicit Gilbert form
/// `ṁ = −γ0 m×H + α m×ṁ − D + β m×D`, where `d` is `(u·∇)m`.
///
/// The drift term is first projected onto the tangent plane of `m`, so the
/// result is orthogonal to `m` and the implicit equation is solved exactly:
/// with `T = −γ0 m×H − D⊥ + β m×D⊥`, `ṁ = (T + α m×T)/(1 + α²)`.
#[inline]
pub fn llg_rate(m: Vec3, h: Vec3, d: Vec3, gamma0: f64, alpha: f64, beta: f64) -> Vec3 {
    let d_perp = d - m * m.dot(d);
    let t = m.cross(h) * (-gamma0) - d_perp + m.cross(d_perp) * beta;
    (t + m.cross(t) * alpha) * (1.0 / (1.0 + alpha * alpha))
}

/// Residual of the implicit equation for a candidate rate `mdot`.
pub fn llg_residual(m: Vec3, h: Vec3, d: Vec3, mdot: Vec3, gamma0: f64, alpha: f64, beta: f64) -> Vec3 {
    let d_perp = d - m * m.dot(d);
    let rhs = m.cross(h) * (-gamma0) + m.cross(mdot) * alpha - d_perp + m.cross(d_perp) * beta;
    mdot - rhs
}

/// dx·∂m/∂x at cell `c` (column `ix`) for flow direction sign(u). Missing
/// neighbors beyond the free edges mirror the edge cell.
#[inline]
fn drift_derivative(m: &[Vec3], nx: usize, ix: usize, c: usize, u: f64, stencil: DriftStencil) -> Vec3 {
    if u == 0.0 {
        return Vec3::ZERO;
    }
    // neighbor `k` columns upstream (k > 0) or downstream (k < 0), mirrored
    let at = |k: isize| -> Vec3 {
        let dir = if u > 0.0 { -k } else { k };
        let j = ix as isize + dir;
        let j = if j < 0 { -j - 1 } else if j >= nx as isize { 2 * nx as isize - j - 1 } else { j };
        m[c - ix + j as usize]
    };
    let sign = if u > 0.0 { 1.0 } else { -1.0 };
    let mc = m[c];
    let d = match stencil {
        DriftStencil::Upwind1 => mc - at(1),
        DriftStencil::Upwind2 => (mc * 3.0 - at(1) * 4.0 + at(2)) * 0.5,
        DriftStencil::Upwind3 => (at(-1) * 2.0 + mc * 3.0 - at(1) * 6.0 + at(2)) * (1.0 / 6.0),
        DriftStencil::Central => (at(-1) - at(1)) * 0.5,
        DriftStencil::Central4 => (at(1) * 8.0 - at(-1) * 8.0 + at(-2) - at(2)) * (-1.0 / 12.0),
    };
    d * sign
}

/// Reusable RK4 / minimizer state for one wire. Integration is restricted to
/// a window of columns; cells outside it are held fixed and act as boundary
/// values for the window.
pub struct Integrator<'a> {
    model: &'a WireModel,
    settings: SolverSettings,
    window: Range<usize>,
    stage: Vec<Vec3>,
    k: [Vec<Vec3>; 4],
    h: Vec<Vec3>,
    stability_checked: bool,
}

impl<'a> Integrator<'a> {
    pub fn new(model: &'a WireModel, settings: &SolverSettings) -> Result<Self> {
        if !(settings.dt > 0.0) || !settings.dt.is_finite() {
            return Err(Error::Integration(format!("time step {} ns must be > 0", settings.dt)));
        }
        let n = model.nx() * model.ny();
        Ok(Self {
            model,
            settings: settings.clone(),
            window: 0..model.nx(),
            stage: Vec::new(),
            k: [vec![Vec3::ZERO; n], vec![Vec3::ZERO; n], vec![Vec3::ZERO; n], vec![Vec3::ZERO; n]],
            h: vec![Vec3::ZERO; n],
            stability_checked: false,
        })
    }

    pub fn window(&self) -> Range<usize> {
        self.window.clone()
    }

    /// Centers the integration window on the wall (or spans the whole wire if
    /// windowing is off or no wall is present).
    pub fn recenter(&mut self, field: &SpinField) {
        let nx = self.model.nx();
        self.window = match self.settings.window_half_width {
            Some(hw) if 2 * hw + 1 < nx => match wall_position(field, &self.model.geometry) {
                Ok(x) => {
                    let c = ((x / self.model.geometry.cell_size) as usize).min(nx - 1);
                    let lo = c.saturating_sub(hw);
                    let hi = (c + hw + 1).min(nx);
                    // keep the width constant near the ends
                    if hi - lo < 2 * hw + 1 {
                        if lo == 0 {
                            0..(2 * hw + 1)
                        } else {
                            (nx - 2 * hw - 1)..nx
                        }
                    } else {
                        lo..hi
                    }
                }
                Err(_) => 0..nx,
            },
            _ => 0..nx,
        };
        self.stage.clear();
        self.stage.extend_from_slice(&field.m);
    }

    /// Verifies γ0·max|H_eff|·dt stays below [`STABILITY_LIMIT`].
    pub fn check_stability(&self, field: &SpinField) -> Result<()> {
        let mut hmax = 0.0f64;
        for iy in 0..self.model.ny() {
            for ix in 0..self.model.nx() {
                hmax = hmax.max(self.model.field_at(&field.m, ix, iy).norm());
            }
        }
        let g = self.model.params.gamma0() * hmax * self.settings.dt * 1e-9;
        if g >= STABILITY_LIMIT {
            return Err(Error::Integration(format!(
                "time step too large: γ0·|H|·dt = {g:.3} (limit {STABILITY_LIMIT})"
            )));
        }
        Ok(())
    }

    fn rates(&mut self, slot: usize, from_stage: bool, m_full: &[Vec3], u: f64) {
        let model = self.model;
        let nx = model.nx();
        let ny = model.ny();
        let p = &model.params;
        let (gamma0, alpha, beta) = (p.gamma0(), p.gilbert_alpha, p.nonadiabatic_beta);
        let inv_dx = 1.0 / model.geometry.dx_m();
        let stencil = self.settings.drift_stencil;
        let m: &[Vec3] = if from_stage { &self.stage } else { m_full };
        let out = &mut self.k[slot];
        for iy in 0..ny {
            for ix in self.window.clone() {
                let c = iy * nx + ix;
                let h = model.field_at(m, ix, iy);
                let d = drift_derivative(m, nx, ix, c, u, stencil) * (u * inv_dx);
                out[c] = llg_rate(m[c], h, d, gamma0, alpha, beta);
            }
        }
    }

    /// One classical RK4 step of `dt_s` seconds at drift velocity `u` (m/s),
    /// followed by per-cell renormalization. Returns the largest pre-normalization
    /// norm deviation.
    pub fn step(&mut self, field: &mut SpinField, u: f64, dt_s: f64) -> f64 {
        if self.stage.len() != field.m.len() {
            self.stage.clear();
            self.stage.extend_from_slice(&field.m);
        }
        let nx = self.model.nx();
        let ny = self.model.ny();
        let win = self.window.clone();

        self.rates(0, false, &field.m, u);
        for (slot, frac) in [(0usize, 0.5), (1, 0.5), (2, 1.0)] {
            for iy in 0..ny {
                for ix in win.clone() {
                    let c = iy * nx + ix;
                    self.stage[c] = field.m[c] + self.k[slot][c] * (frac * dt_s);
                }
            }
            self.rates(slot + 1, true, &field.m, u);
        }
        let mut drift = 0.0f64;
        let w = dt_s / 6.0;
        for iy in 0..ny {
            for ix in win.clone() {
                let c = iy * nx + ix;
                let next = field.m[c]
                    + (self.k[0][c] + self.k[1][c] * 2.0 + self.k[2][c] * 2.0 + self.k[3][c]) * w;
                let n = next.norm();
                drift = drift.max((n - 1.0).abs());
                field.m[c] = next * (1.0 / n);
                self.stage[c] = field.m[c];
            }
        }
        field.time += dt_s * 1e9;
        drift
    }

    /// Integrates for `duration` ns at constant drift velocity `u`.
    pub fn run(&mut self, field: &mut SpinField, u: f64, duration: f64) -> Result<()> {
        self.run_with(field, u, duration, |_| false)
    }

    /// Like [`run`](Self::run), but calls `stop` after every window
    /// re-centering and halts early when it returns true.
    pub fn run_with<F>(&mut self, field: &mut SpinField, u: f64, duration: f64, mut stop: F) -> Result<()>
    where
        F: FnMut(&SpinField) -> bool,
    {
        self.model.check_field(field)?;
        if !self.stability_checked {
            self.check_stability(field)?;
            self.stability_checked = true;
        }
        let dt = self.settings.dt;
        let steps = (duration / dt).round() as usize;
        let every = self.settings.window_recenter_steps.max(1);
        self.recenter(field);
        for s in 0..steps {
            if s > 0 && s % every == 0 {
                if !field.is_finite() {
                    return Err(Error::Integration(format!("non-finite state at t = {} ns", field.time)));
                }
                self.recenter(field);
                if stop(field) {
                    return Ok(());
                }
            }
            self.step(field, u, dt * 1e-9);
        }
        if !field.is_finite() {
            return Err(Error::Integration(format!("non-finite state at t = {} ns", field.time)));
        }
        Ok(())
    }

    /// Relaxes to the nearest energy minimum: Barzilai–Borwein descent until
    /// the largest relative torque |m×H|/|H| drops below the relaxation
    /// tolerance. When the descent stalls, 1 ns of current-free LLG moves the
    /// state off the stall before descending again; after
    /// [`RELAX_DYNAMICS_CAP`] ns of such dynamics the state is accepted as is.
    /// Returns the total descent iteration count.
    pub fn relax(&mut self, field: &mut SpinField) -> Result<usize> {
        let mut iterations = 0;
        let mut dynamics = 0.0;
        loop {
            match self.descend(field) {
                Ok(it) => return Ok(iterations + it),
                Err(Error::RelaxationFailure { residual, iterations: it }) => {
                    iterations += it;
                    if dynamics >= RELAX_DYNAMICS_CAP {
                        log::warn!("relaxation capped after {dynamics} ns of dynamics, residual {residual:.2e}");
                        return Ok(iterations);
                    }
                    self.run(field, 0.0, 1.0)?;
                    dynamics += 1.0;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn descend(&mut self, field: &mut SpinField) -> Result<usize> {
        self.model.check_field(field)?;
        self.recenter(field);
        let model = self.model;
        let nx = model.nx();
        let ny = model.ny();
        let win = self.window.clone();
        let tol = self.settings.relax_tolerance;

        // k[0]: previous m, k[1]: previous descent direction, k[2]: current direction
        let mut step;
        let mut residual = f64::INFINITY;
        for it in 0..self.settings.relax_max_iterations {
            let mut hmax = 0.0f64;
            let mut tmax = 0.0f64;
            residual = 0.0;
            for iy in 0..ny {
                for ix in win.clone() {
                    let c = iy * nx + ix;
                    let h = model.field_at(&field.m, ix, iy);
                    let m = field.m[c];
                    let tau = h - m * m.dot(h);
                    self.h[c] = h;
                    self.k[2][c] = tau;
                    let hn = h.norm();
                    let tn = tau.norm();
                    hmax = hmax.max(hn);
                    tmax = tmax.max(tn);
                    if hn > 0.0 {
                        residual = residual.max(tn / hn);
                    }
                }
            }
            if !residual.is_finite() {
                return Err(Error::Integration("non-finite torque during relaxation".into()));
            }
            if residual < tol {
                return Ok(it);
            }
            if it == 0 {
                step = 1e-2 / hmax.max(1.0);
            } else {
                let (mut ss, mut sy, mut yy) = (0.0, 0.0, 0.0);
                for iy in 0..ny {
                    for ix in win.clone() {
                        let c = iy * nx + ix;
                        let s = field.m[c] - self.k[0][c];
                        let y = self.k[2][c] - self.k[1][c];
                        ss += s.norm_sq();
                        sy += s.dot(y);
                        yy += y.norm_sq();
                    }
                }
                let bb = if it % 2 == 0 { -ss / sy } else { -sy / yy };
                step = if bb.is_finite() && bb > 0.0 { bb } else { 1e-2 / hmax.max(1.0) };
            }
            // cap the largest single-cell rotation
            if step * tmax > 0.2 {
                step = 0.2 / tmax;
            }
            for iy in 0..ny {
                for ix in win.clone() {
                    let c = iy * nx + ix;
                    self.k[0][c] = field.m[c];
                    self.k[1][c] = self.k[2][c];
                    field.m[c] = (field.m[c] + self.k[2][c] * step).normalized();
                }
            }
        }
        Err(Error::RelaxationFailure {
            residual,
            iterations: self.settings.relax_max_iterations,
        })
    }
}

/// Advances the whole wire by one RK4 step of `dt` ns under `drive`'s current.
pub fn llg_step(field: &SpinField, model: &WireModel, drive: &DriveSpec, dt: f64) -> Result<SpinField> {
    model.check_field(field)?;
    if !(dt > 0.0) {
        return Err(Error::Integration(format!("time step {dt} ns must be > 0")));
    }
    if !field.is_finite() {
        return Err(Error::Integration("non-finite magnetization".into()));
    }
    let settings = SolverSettings {
        dt,
        window_half_width: None,
        ..SolverSettings::default()
    };
    let mut integ = Integrator::new(model, &settings)?;
    integ.recenter(field);
    let mut next = field.clone();
    let u = model.params.drift_velocity(drive.current_density);
    integ.step(&mut next, u, dt * 1e-9);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::micromag::params::{MaterialParams, WireGeometry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        ) * scale
    }

    #[test]
    fn explicit_form_satisfies_implicit_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MaterialParams::default();
        let g0 = p.gamma0();
        for _ in 0..200 {
            let m = rand_vec(&mut rng, 1.0).normalized();
            let h = rand_vec(&mut rng, 2.0e6);
            let d = rand_vec(&mut rng, 5.0e10);
            let alpha = rng.random::<f64>() * 0.5 + 0.01;
            let beta = rng.random::<f64>() * 0.5;
            let mdot = llg_rate(m, h, d, g0, alpha, beta);
            let r = llg_residual(m, h, d, mdot, g0, alpha, beta);
            let scale = (g0 * h.norm()).max(d.norm());
            assert!(r.norm() / scale < 1e-10, "residual {}", r.norm() / scale);
            assert!(mdot.dot(m).abs() / scale < 1e-12);
        }
    }

    #[test]
    fn fixed_point_when_parallel_to_field() {
        let g = WireGeometry::new(80.0, 16.0, 6.0, 4.0).unwrap();
        let model = WireModel::clean(g.clone(), MaterialParams::default()).unwrap();
        let f = SpinField::uniform(g.nx(), g.ny(), Vec3::Z);
        let drive = DriveSpec {
            current_density: 0.0,
            ..DriveSpec::default()
        };
        let next = llg_step(&f, &model, &drive, 2e-4).unwrap();
        assert_eq!(next.m, f.m);
    }

    #[test]
    fn rejects_bad_step() {
        let g = WireGeometry::new(80.0, 16.0, 6.0, 4.0).unwrap();
        let model = WireModel::clean(g.clone(), MaterialParams::default()).unwrap();
        let mut f = SpinField::uniform(g.nx(), g.ny(), Vec3::Z);
        let drive = DriveSpec::default();
        assert!(llg_step(&f, &model, &drive, 0.0).is_err());
        f.m[3] = Vec3::new(f64::NAN, 0.0, 1.0);
        assert!(llg_step(&f, &model, &drive, 2e-4).is_err());
    }

    #[test]
    fn tilted_spin_loses_energy() {
        let g = WireGeometry::new(4.0, 4.0, 6.0, 4.0).unwrap();
        let model = WireModel::clean(g.clone(), MaterialParams::default()).unwrap();
        let mut f = SpinField::uniform(1, 1, Vec3::new(0.5, 0.0, 1.0));
        let drive = DriveSpec {
            current_density: 0.0,
            ..DriveSpec::default()
        };
        let mut e = model.energy(&f);
        for _ in 0..2000 {
            f = llg_step(&f, &model, &drive, 2e-4).unwrap();
            let e2 = model.energy(&f);
            assert!(e2 <= e + 1e-8 * e.abs());
            e = e2;
        }
        assert!(f.at(0, 0).z > 0.9);
    }

    #[test]
    fn norm_drift_is_small_and_removed() {
        let g = WireGeometry::new(80.0, 16.0, 6.0, 4.0).unwrap();
        let model = WireModel::clean(g.clone(), MaterialParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = crate::micromag::domain_wall_ansatz(&model, 40.0, true).unwrap();
        for v in &mut f.m {
            *v = (*v + rand_vec(&mut rng, 0.05)).normalized();
        }
        let settings = SolverSettings {
            window_half_width: None,
            ..SolverSettings::default()
        };
        let mut integ = Integrator::new(&model, &settings).unwrap();
        integ.recenter(&f);
        let u = model.params.drift_velocity(2e12);
        for _ in 0..200 {
            let drift = integ.step(&mut f, u, 2e-13);
            assert!(drift < 1e-4, "drift {drift}");
            assert!(f.max_norm_error() < 1e-9);
        }
    }
}
