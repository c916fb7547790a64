//! Nonuniform domain-wall synapses in a crossbar PCA network, with Gaussian
//! population coding of the inputs.
//!
//! - [`micromag`]: LLG + spin-transfer-torque simulation of a disordered strip
//! - [`device`]: pulse-programmed synapses backed by the simulation or a recorded trace
//! - [`encoding`]: Gaussian tuning-curve population encoder
//! - [`pca`]: two-column crossbar trained with Sanger's rule, plus a Jacobi eigen oracle
//! - [`datasets`]: mouse-protein loader, normalization, synthetic fixtures
//! - [`experiments`]: logistic scoring, Monte Carlo over seeds, population sweeps

pub mod datasets;
pub mod device;
pub mod encoding;
pub mod error;
pub mod experiments;
pub mod micromag;
pub mod pca;
pub mod vec3;

pub use error::{Error, Result};
pub use vec3::Vec3;
