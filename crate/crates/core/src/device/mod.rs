//! Analog synapses: a pulse-programmed domain-wall wire read through its
//! Hall resistance, and an exact reference.

mod ideal;
mod library;
mod trace;
mod wall_synapse;

pub use ideal::IdealSynapse;
pub use library::{generate_device_library, read_library, write_library, LibrarySpec};
pub use trace::{calibrate, record_response_trace, DeviceResponseTrace, WireDevice};
pub use wall_synapse::{pulses_for, DomainWallSynapse};

use crate::error::Result;
use crate::micromag::HALL_CLIP;

/// Hall resistance (mΩ) corresponding to |w| = 1.
pub const WEIGHT_SCALE: f64 = HALL_CLIP;

/// A stored analog weight in a crossbar.
pub trait Synapse {
    /// Current weight. Never changes device state.
    fn read_weight(&self) -> f64;

    /// Requests a weight change and returns the change actually achieved.
    fn write_delta(&mut self, requested: f64) -> Result<f64>;

    /// Programs the device toward `target` and returns the weight reached.
    fn randomize_weight(&mut self, target: f64) -> Result<f64>;
}

pub fn resistance_to_weight(r_mohm: f64) -> f64 {
    (r_mohm / WEIGHT_SCALE).clamp(-1.0, 1.0)
}
