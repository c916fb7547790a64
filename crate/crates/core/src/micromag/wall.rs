//! Domain-wall construction and observables: position, Hall readout,
//! velocity and depinning threshold.

use super::field::{SpinField, WireModel};
use super::llg::Integrator;
use super::params::{DriveSpec, MaterialParams, SolverSettings, WireGeometry, HALL_CLIP};
use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Tanh-profile Bloch wall at `wall_x` (nm), relaxed over the whole wire.
///
/// `up_on_left` puts m_z = +1 at x < wall_x. The in-wall moment points along +y.
pub fn init_domain_wall(
    model: &WireModel,
    wall_x: f64,
    up_on_left: bool,
    settings: &SolverSettings,
) -> Result<SpinField> {
    let field = domain_wall_ansatz(model, wall_x, up_on_left)?;
    relax_full(model, field, settings)
}

/// Unrelaxed tanh ansatz with width √(A/K).
pub fn domain_wall_ansatz(model: &WireModel, wall_x: f64, up_on_left: bool) -> Result<SpinField> {
    let g = &model.geometry;
    if !(wall_x > 0.0 && wall_x < g.length) {
        return Err(Error::InvalidParameter(format!(
            "wall position {wall_x} nm outside (0, {})",
            g.length
        )));
    }
    let width = model.params.wall_width() * 1e9;
    let sign = if up_on_left { -1.0 } else { 1.0 };
    let (nx, ny) = (model.nx(), model.ny());
    let mut field = SpinField::uniform(nx, ny, Vec3::Z);
    for ix in 0..nx {
        let s = (g.x_center(ix) - wall_x) / width;
        let v = Vec3::new(0.0, 1.0 / s.cosh(), sign * s.tanh());
        for iy in 0..ny {
            field.m[iy * nx + ix] = v.normalized();
        }
    }
    Ok(field)
}

/// Energy-minimizes the whole wire (no window).
pub fn relax_full(model: &WireModel, mut field: SpinField, settings: &SolverSettings) -> Result<SpinField> {
    let full = SolverSettings {
        window_half_width: None,
        ..settings.clone()
    };
    let mut integ = Integrator::new(model, &full)?;
    integ.relax(&mut field)?;
    Ok(field)
}

/// Zero crossing of the row-averaged m_z profile, nm, linearly interpolated
/// between column centers. With several crossings the one closest to the
/// position implied by ⟨m_z⟩ is returned.
pub fn wall_position(field: &SpinField, geometry: &WireGeometry) -> Result<f64> {
    let prof = field.mz_profile();
    let n = prof.len();
    if n < 2 {
        return Err(Error::Saturated);
    }
    let dx = geometry.cell_size;
    let mut crossings = Vec::new();
    for i in 0..n - 1 {
        let (a, b) = (prof[i], prof[i + 1]);
        if a == 0.0 {
            crossings.push(geometry.x_center(i));
        } else if a * b < 0.0 {
            crossings.push(geometry.x_center(i) + dx * a / (a - b));
        }
    }
    if prof[n - 1] == 0.0 {
        crossings.push(geometry.x_center(n - 1));
    }
    match crossings.len() {
        0 => Err(Error::Saturated),
        1 => Ok(crossings[0]),
        _ => {
            let mean: f64 = prof.iter().sum::<f64>() / n as f64;
            let up_left = prof[0] > prof[n - 1];
            let implied = if up_left {
                geometry.length * (1.0 + mean) / 2.0
            } else {
                geometry.length * (1.0 - mean) / 2.0
            };
            Ok(crossings
                .into_iter()
                .min_by(|a, b| (a - implied).abs().total_cmp(&(b - implied).abs()))
                .unwrap())
        }
    }
}

/// Raw Hall resistance R_max·⟨m_z⟩ in mΩ, unclipped.
pub fn hall_resistance_raw(field: &SpinField, params: &MaterialParams) -> f64 {
    params.hall_r_max * field.mean_mz_in(0..field.nx)
}

/// Clips a raw Hall value to the ±195 mΩ readout range.
pub fn clip_hall(raw: f64) -> f64 {
    raw.clamp(-HALL_CLIP, HALL_CLIP)
}

/// Hall resistance in mΩ over the whole wire, clipped to ±195 mΩ.
pub fn hall_resistance(field: &SpinField, params: &MaterialParams) -> f64 {
    clip_hall(hall_resistance_raw(field, params))
}

/// Hall resistance over a window of columns.
pub fn hall_resistance_in(field: &SpinField, params: &MaterialParams, cols: std::ops::Range<usize>) -> f64 {
    clip_hall(params.hall_r_max * field.mean_mz_in(cols))
}

/// Runs one pulse: current on for `pulse_duration`, off for `relax_duration`,
/// then energy relaxation around the wall.
pub fn apply_current_pulse(
    field: &SpinField,
    model: &WireModel,
    drive: &DriveSpec,
    settings: &SolverSettings,
) -> Result<SpinField> {
    drive.validate()?;
    let mut integ = Integrator::new(model, settings)?;
    let mut next = field.clone();
    pulse_with(&mut integ, &mut next, model, drive)?;
    Ok(next)
}

/// Applies one pulse that halts early if |R_H| would pass the readout
/// boundary of 195 mΩ on the side the current drives toward. Returns true when the boundary
/// stopped the pulse; the relaxation phase still runs.
pub fn apply_bounded_pulse(
    integ: &mut Integrator<'_>,
    field: &mut SpinField,
    model: &WireModel,
    drive: &DriveSpec,
) -> Result<bool> {
    let params = &model.params;
    let u = params.drift_velocity(drive.current_density);
    let r0 = hall_resistance_raw(field, params);
    let dir = drive.current_density.signum();
    let outward = |r: f64| r * dir >= HALL_CLIP && r.abs() >= r0.abs();
    if outward(r0) {
        return Ok(true);
    }
    let mut hit = false;
    if u != 0.0 {
        integ.run_with(field, u, drive.pulse_duration, |f| {
            hit = outward(hall_resistance_raw(f, params));
            hit
        })?;
    } else {
        field.time += drive.pulse_duration;
    }
    if drive.relax_duration > 0.0 && u != 0.0 {
        integ.run(field, 0.0, drive.relax_duration)?;
    } else {
        field.time += drive.relax_duration;
    }
    integ.relax(field)?;
    Ok(hit || outward(hall_resistance_raw(field, params)))
}

pub(crate) fn pulse_with(
    integ: &mut Integrator<'_>,
    field: &mut SpinField,
    model: &WireModel,
    drive: &DriveSpec,
) -> Result<()> {
    let u = model.params.drift_velocity(drive.current_density);
    if u != 0.0 {
        integ.run(field, u, drive.pulse_duration)?;
    } else {
        field.time += drive.pulse_duration;
    }
    if drive.relax_duration > 0.0 && u != 0.0 {
        integ.run(field, 0.0, drive.relax_duration)?;
    } else {
        field.time += drive.relax_duration;
    }
    integ.relax(field)?;
    Ok(())
}

/// Velocity run configuration.
#[derive(Clone, Debug)]
pub struct VelocityProbe {
    /// Initial wall position, nm. `None` starts a quarter of the way in from
    /// the end opposite the drive direction.
    pub start_x: Option<f64>,
    /// Minimum distance, in cells, the wall may approach either end.
    pub boundary_cells: usize,
}

impl Default for VelocityProbe {
    fn default() -> Self {
        Self {
            start_x: None,
            boundary_cells: 10,
        }
    }
}

fn default_start(geometry: &WireGeometry, current_density: f64) -> f64 {
    if current_density >= 0.0 {
        0.25 * geometry.length
    } else {
        0.75 * geometry.length
    }
}

/// Average wall velocity (m/s) over `measure_time` ns after `settle_time` ns
/// of constant current.
pub fn measure_velocity(
    model: &WireModel,
    current_density: f64,
    settle_time: f64,
    measure_time: f64,
    settings: &SolverSettings,
    probe: &VelocityProbe,
) -> Result<f64> {
    if !(measure_time > 0.0) || !(settle_time >= 0.0) {
        return Err(Error::InvalidParameter("settle/measure times must be positive".into()));
    }
    let g = &model.geometry;
    let start = probe.start_x.unwrap_or_else(|| default_start(g, current_density));
    let mut field = init_domain_wall(model, start, true, settings)?;
    let u = model.params.drift_velocity(current_density);
    let margin = probe.boundary_cells as f64 * g.cell_size;
    let hit = std::cell::Cell::new(None);
    let guard = |f: &SpinField| -> bool {
        match wall_position(f, g) {
            Ok(x) if x > margin && x < g.length - margin => false,
            _ => {
                hit.set(Some(f.time));
                true
            }
        }
    };
    let mut integ = Integrator::new(model, settings)?;
    integ.run_with(&mut field, u, settle_time, guard)?;
    if let Some(t) = hit.get() {
        return Err(Error::BoundaryHit { time_ns: t });
    }
    let t0 = field.time;
    let x0 = wall_position(&field, g)?;
    integ.run_with(&mut field, u, measure_time, guard)?;
    if let Some(t) = hit.get() {
        return Err(Error::BoundaryHit { time_ns: t });
    }
    let x1 = wall_position(&field, g)?;
    // nm/ns == m/s
    Ok((x1 - x0) / (field.time - t0))
}

/// Depinning test used by the critical-current search.
#[derive(Clone, Debug)]
pub struct DepinningCriterion {
    /// Distance the wall must cover, nm.
    pub travel: f64,
    /// Simulated time budget per probe, ns.
    pub budget: f64,
    /// A probe is declared pinned once the wall moved less than
    /// `stall_distance` nm over the last `stall_window` ns.
    pub stall_window: f64,
    pub stall_distance: f64,
    /// Initial wall position, nm (`None`: a quarter of the wire).
    pub start_x: Option<f64>,
}

impl Default for DepinningCriterion {
    fn default() -> Self {
        Self {
            travel: 200.0,
            budget: 20.0,
            stall_window: 1.0,
            stall_distance: 1.0,
            start_x: None,
        }
    }
}

/// Reports whether the wall travels the required distance within budget at
/// `current_density`, starting from the relaxed state `start`.
pub fn wall_depins(
    model: &WireModel,
    start: &SpinField,
    current_density: f64,
    criterion: &DepinningCriterion,
    settings: &SolverSettings,
) -> Result<bool> {
    let g = &model.geometry;
    let x0 = wall_position(start, g)?;
    let u = model.params.drift_velocity(current_density);
    let mut field = start.clone();
    let t0 = field.time;
    let mut history: Vec<(f64, f64)> = vec![(t0, x0)];
    let mut moved = false;
    let mut integ = Integrator::new(model, settings)?;
    integ.run_with(&mut field, u, criterion.budget, |f| {
        let x = match wall_position(f, g) {
            Ok(x) => x,
            Err(_) => {
                moved = true;
                return true;
            }
        };
        if (x - x0).abs() >= criterion.travel {
            moved = true;
            return true;
        }
        history.push((f.time, x));
        let now = f.time;
        if now - t0 >= criterion.stall_window {
            let past = history
                .iter()
                .rev()
                .find(|(t, _)| now - t >= criterion.stall_window)
                .map(|&(_, x)| x)
                .unwrap_or(x0);
            if (x - past).abs() < criterion.stall_distance {
                return true;
            }
        }
        false
    })?;
    Ok(moved)
}

/// Bisects the smallest current density (A/m²) that depins the wall.
pub fn find_critical_current(
    model: &WireModel,
    j_lo: f64,
    j_hi: f64,
    tol: f64,
    criterion: &DepinningCriterion,
    settings: &SolverSettings,
) -> Result<f64> {
    if !(j_hi > j_lo) || !(tol > 0.0) {
        return Err(Error::Bracket(format!("need j_lo < j_hi and tol > 0, got [{j_lo:e}, {j_hi:e}]")));
    }
    let g = &model.geometry;
    let start_x = criterion.start_x.unwrap_or_else(|| default_start(g, j_hi));
    let start = init_domain_wall(model, start_x, true, settings)?;
    if wall_depins(model, &start, j_lo, criterion, settings)? {
        return Err(Error::Bracket(format!("wall already moves at j_lo = {j_lo:e}")));
    }
    if !wall_depins(model, &start, j_hi, criterion, settings)? {
        return Err(Error::Bracket(format!("wall still pinned at j_hi = {j_hi:e}")));
    }
    let (mut lo, mut hi) = (j_lo, j_hi);
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if wall_depins(model, &start, mid, criterion, settings)? {
            hi = mid;
        } else {
            lo = mid;
        }
        log::debug!("critical current bracket [{lo:e}, {hi:e}]");
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean(length: f64) -> WireModel {
        let g = WireGeometry::new(length, 80.0, 6.0, 4.0).unwrap();
        WireModel::clean(g, MaterialParams::default()).unwrap()
    }

    #[test]
    fn hall_readout_scales_and_clips() {
        let p = MaterialParams::default();
        let mut f = SpinField::uniform(10, 2, Vec3::Z);
        assert_eq!(hall_resistance(&f, &p), 195.0);
        assert_eq!(hall_resistance_raw(&f, &p), 215.0);
        f = SpinField::uniform(10, 2, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(hall_resistance(&f, &p), 0.0);
        let s = (0.75f64).sqrt();
        f = SpinField::uniform(10, 2, Vec3::new(s, 0.0, -0.5));
        assert!((hall_resistance(&f, &p) + 107.5).abs() < 1e-9);
    }

    #[test]
    fn ansatz_wall_position_is_construction_point() {
        let model = clean(2000.0);
        for &x in &[1000.0, 500.0, 333.0] {
            let f = domain_wall_ansatz(&model, x, true).unwrap();
            let got = wall_position(&f, &model.geometry).unwrap();
            assert!((got - x).abs() < 4.0, "{got} vs {x}");
        }
    }

    #[test]
    fn saturated_state_has_no_wall() {
        let model = clean(400.0);
        let f = SpinField::uniform(model.nx(), model.ny(), Vec3::Z);
        assert_eq!(wall_position(&f, &model.geometry), Err(Error::Saturated));
    }

    #[test]
    fn wall_position_matches_profile_scan() {
        // Brute-force oracle: scan the profile for its sign change.
        let model = clean(400.0);
        let mut f = domain_wall_ansatz(&model, 151.0, false).unwrap();
        // add a staircase-like plateau
        let nx = model.nx();
        for iy in 0..model.ny() {
            for ix in 20..24 {
                f.m[iy * nx + ix] = Vec3::new(0.0, 0.6, -0.8);
            }
        }
        let prof = f.mz_profile();
        let i = (0..nx - 1).find(|&i| prof[i] < 0.0 && prof[i + 1] > 0.0).unwrap();
        let got = wall_position(&f, &model.geometry).unwrap();
        assert!(got >= model.geometry.x_center(i) && got <= model.geometry.x_center(i + 1));
    }

    #[test]
    fn relaxation_lowers_energy_of_ansatz() {
        let model = clean(400.0);
        let settings = SolverSettings::default();
        let ansatz = domain_wall_ansatz(&model, 200.0, true).unwrap();
        let relaxed = init_domain_wall(&model, 200.0, true, &settings).unwrap();
        assert!(model.energy(&relaxed) < model.energy(&ansatz));
        assert!(model.max_torque(&relaxed) < settings.relax_tolerance);
    }

    #[test]
    fn centered_wall_reads_zero() {
        let model = clean(2000.0);
        let f = init_domain_wall(&model, 1000.0, true, &SolverSettings::default()).unwrap();
        assert!(hall_resistance(&f, &model.params).abs() < 2.0);
    }

    #[test]
    fn wall_near_end_saturates_readout() {
        let model = clean(2000.0);
        let f = init_domain_wall(&model, 6.0, false, &SolverSettings::default()).unwrap();
        assert!(f.mean().z > 0.98);
        assert_eq!(hall_resistance(&f, &model.params), 195.0);
    }

    #[test]
    fn rejects_wall_outside_wire() {
        let model = clean(400.0);
        assert!(domain_wall_ansatz(&model, 0.0, true).is_err());
        assert!(domain_wall_ansatz(&model, 400.0, true).is_err());
    }

    #[test]
    fn zero_current_pulse_keeps_state() {
        let model = clean(400.0);
        let settings = SolverSettings::default();
        let f = init_domain_wall(&model, 200.0, true, &settings).unwrap();
        let drive = DriveSpec {
            current_density: 0.0,
            ..DriveSpec::default()
        };
        let next = apply_current_pulse(&f, &model, &drive, &settings).unwrap();
        let x0 = wall_position(&f, &model.geometry).unwrap();
        let x1 = wall_position(&next, &model.geometry).unwrap();
        assert!((x1 - x0).abs() < 0.1);
        assert!(model.max_torque(&next) < settings.relax_tolerance);
    }

    #[test]
    fn bracket_errors() {
        let model = clean(400.0);
        let c = DepinningCriterion::default();
        let s = SolverSettings::default();
        assert!(matches!(
            find_critical_current(&model, 2e12, 1e12, 1e10, &c, &s),
            Err(Error::Bracket(_))
        ));
    }
}
