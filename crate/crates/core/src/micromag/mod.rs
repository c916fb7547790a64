//! Micromagnetic model of a current-driven domain wall in a disordered
//! perpendicular strip.

mod field;
mod grains;
mod llg;
mod params;
mod wall;

pub use field::{effective_field, SpinField, WireModel};
pub use grains::{generate_voronoi_grains, GrainMap};
pub use llg::{llg_rate, llg_residual, llg_step, Integrator, RELAX_DYNAMICS_CAP, STABILITY_LIMIT};
pub use params::{
    DriftStencil, DriveSpec, MaterialParams, SolverSettings, WireGeometry, E_CHARGE, HALL_CLIP, MU0, MU_B,
};
pub use wall::{
    apply_bounded_pulse, apply_current_pulse, clip_hall, domain_wall_ansatz, find_critical_current, hall_resistance,
    hall_resistance_in, hall_resistance_raw, init_domain_wall, measure_velocity, relax_full,
    wall_depins, wall_position, DepinningCriterion, VelocityProbe,
};
