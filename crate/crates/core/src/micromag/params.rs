use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Vacuum permeability (T·m/A).
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
/// Bohr magneton (J/T).
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Elementary charge (C).
pub const E_CHARGE: f64 = 1.602_176_634e-19;

/// Hall readout is clipped to this magnitude (mΩ).
pub const HALL_CLIP: f64 = 195.0;

/// Material constants of the ferromagnetic strip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    /// Exchange stiffness A (J/m).
    pub exchange_a: f64,
    /// Uniaxial anisotropy K (J/m³).
    pub anisotropy_k: f64,
    /// Saturation magnetization Ms (A/m).
    pub saturation_ms: f64,
    pub gilbert_alpha: f64,
    pub nonadiabatic_beta: f64,
    pub polarization_p: f64,
    /// Gyromagnetic ratio γ (rad·s⁻¹·T⁻¹).
    pub gyromagnetic_gamma: f64,
    /// Hall resistance at full saturation (mΩ).
    pub hall_r_max: f64,
    /// Local hard-axis anisotropy on m_x (J/m³), standing in for the wall's
    /// magnetostatic Néel/Bloch splitting. Zero disables it.
    pub wall_hard_axis_k: f64,
    /// Uniform applied field (A/m).
    pub external_field: [f64; 3],
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            exchange_a: 3.0e-11,
            anisotropy_k: 8.0e5,
            saturation_ms: 8.0e5,
            gilbert_alpha: 0.95,
            nonadiabatic_beta: 0.7,
            polarization_p: 1.0,
            gyromagnetic_gamma: 1.760_859_6e11,
            hall_r_max: 215.0,
            wall_hard_axis_k: 2.45e5,
            external_field: [0.0; 3],
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.exchange_a > 0.0) {
            return bad("exchange_a must be > 0");
        }
        if !(self.anisotropy_k > 0.0) {
            return bad("anisotropy_k must be > 0");
        }
        if !(self.saturation_ms > 0.0) {
            return bad("saturation_ms must be > 0");
        }
        if !(self.gilbert_alpha > 0.0 && self.gilbert_alpha < 1.0) {
            return bad("gilbert_alpha must lie in (0, 1)");
        }
        if !(self.nonadiabatic_beta >= 0.0 && self.nonadiabatic_beta < 1.0) {
            return bad("nonadiabatic_beta must lie in [0, 1)");
        }
        if !(self.polarization_p > 0.0 && self.polarization_p <= 1.0) {
            return bad("polarization_p must lie in (0, 1]");
        }
        if !(self.gyromagnetic_gamma > 0.0) {
            return bad("gyromagnetic_gamma must be > 0");
        }
        if !(self.wall_hard_axis_k >= 0.0) {
            return bad("wall_hard_axis_k must be >= 0");
        }
        Ok(())
    }

    /// γ·μ0, the precession rate per unit field in A/m.
    pub fn gamma0(&self) -> f64 {
        self.gyromagnetic_gamma * MU0
    }

    /// Spin-drift velocity u = P·J·μB/(e·Ms) in m/s for a current density in A/m².
    pub fn drift_velocity(&self, current_density: f64) -> f64 {
        self.polarization_p * current_density * MU_B / (E_CHARGE * self.saturation_ms)
    }

    /// Steady wall velocity (β/α)·u below Walker breakdown.
    pub fn steady_velocity(&self, current_density: f64) -> f64 {
        self.nonadiabatic_beta / self.gilbert_alpha * self.drift_velocity(current_density)
    }

    /// Bloch wall width parameter √(A/K) in m.
    pub fn wall_width(&self) -> f64 {
        (self.exchange_a / self.anisotropy_k).sqrt()
    }

    /// Walker velocity scale γ0·Δ·H_K/2 with H_K = 2K_hard/(μ0·Ms).
    pub fn walker_velocity(&self) -> f64 {
        let hk = 2.0 * self.wall_hard_axis_k / (MU0 * self.saturation_ms);
        0.5 * self.gamma0() * self.wall_width() * hk
    }

    pub fn external(&self) -> Vec3 {
        Vec3::new(
            self.external_field[0],
            self.external_field[1],
            self.external_field[2],
        )
    }
}

/// Strip dimensions in nm. Cells are square in-plane with one layer through
/// the thickness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WireGeometry {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub cell_size: f64,
}

impl Default for WireGeometry {
    fn default() -> Self {
        Self {
            length: 2000.0,
            width: 80.0,
            thickness: 6.0,
            cell_size: 4.0,
        }
    }
}

impl WireGeometry {
    pub fn new(length: f64, width: f64, thickness: f64, cell_size: f64) -> Result<Self> {
        let g = Self {
            length,
            width,
            thickness,
            cell_size,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) || !(self.thickness > 0.0) {
            return Err(Error::InvalidGeometry(
                "cell size and thickness must be positive".into(),
            ));
        }
        let integral = |v: f64| {
            let r = v / self.cell_size;
            (r - r.round()).abs() < 1e-9
        };
        if !integral(self.length) || !integral(self.width) {
            return Err(Error::InvalidGeometry(format!(
                "length {} and width {} must be multiples of cell size {}",
                self.length, self.width, self.cell_size
            )));
        }
        if self.nx() == 0 || self.ny() == 0 {
            return Err(Error::InvalidGeometry("wire has zero cells".into()));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        (self.length / self.cell_size).round().max(0.0) as usize
    }

    pub fn ny(&self) -> usize {
        (self.width / self.cell_size).round().max(0.0) as usize
    }

    pub fn cell_count(&self) -> usize {
        self.nx() * self.ny()
    }

    /// Center of column `i` along the wire, nm.
    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.cell_size
    }

    pub(crate) fn dx_m(&self) -> f64 {
        self.cell_size * 1e-9
    }
}

/// One current pulse followed by a current-free interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSpec {
    /// Signed current density along x (A/m²).
    pub current_density: f64,
    /// ns
    pub pulse_duration: f64,
    /// ns
    pub relax_duration: f64,
}

impl Default for DriveSpec {
    fn default() -> Self {
        Self {
            current_density: 2.0e12,
            pulse_duration: 0.5,
            relax_duration: 0.5,
        }
    }
}

impl DriveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.pulse_duration > 0.0) {
            return Err(Error::InvalidParameter("pulse_duration must be > 0".into()));
        }
        if !(self.relax_duration >= 0.0) {
            return Err(Error::InvalidParameter("relax_duration must be >= 0".into()));
        }
        if !self.current_density.is_finite() {
            return Err(Error::InvalidParameter("current density must be finite".into()));
        }
        Ok(())
    }

    pub fn reversed(&self) -> Self {
        Self {
            current_density: -self.current_density,
            ..self.clone()
        }
    }
}

/// Finite-difference stencil for the spin-drift derivative u·∂m/∂x.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftStencil {
    /// (m_i − m_{i−1})/dx against the flow.
    Upwind1,
    /// (3m_i − 4m_{i−1} + m_{i−2})/(2dx) against the flow.
    Upwind2,
    /// (2m_{i+1} + 3m_i − 6m_{i−1} + m_{i−2})/(6dx), biased against the flow.
    Upwind3,
    /// (m_{i+1} − m_{i−1})/(2dx).
    Central,
    /// (−m_{i+2} + 8m_{i+1} − 8m_{i−1} + m_{i−2})/(12dx).
    Central4,
}

/// Numerical controls for time integration and relaxation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// RK4 time step (ns).
    pub dt: f64,
    /// max |m×H|/|H| accepted as relaxed.
    pub relax_tolerance: f64,
    /// Iteration cap for the energy minimizer.
    pub relax_max_iterations: usize,
    /// Half-width, in columns, of the integration window that follows the
    /// wall. `None` integrates the full wire.
    pub window_half_width: Option<usize>,
    /// Steps between window re-centerings.
    pub window_recenter_steps: usize,
    pub drift_stencil: DriftStencil,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            dt: 2.0e-4,
            relax_tolerance: 1e-4,
            relax_max_iterations: 20_000,
            window_half_width: Some(30),
            window_recenter_steps: 50,
            drift_stencil: DriftStencil::Upwind3,
        }
    }
}
