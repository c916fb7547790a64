//! Two-column crossbar trained online with Sanger's rule.

mod crossbar;
mod jacobi;

pub use crossbar::{sanger_deltas, Crossbar, Diagnostics, TraceRow, TrainingTrace, DEFAULT_LEARNING_RATE};
pub use jacobi::{jacobi_eigen, pca_oracle, sample_covariance, PcaOracle, SymmetricEigen};
