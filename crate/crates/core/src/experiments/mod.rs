//! Training and scoring of the three network variants over many seeds.

mod logistic;
mod runner;

pub use logistic::{
    log_likelihood, log_likelihood_gradient, logistic_fit, score, Boundary, FitReport, GRADIENT_TOLERANCE,
    LEARNING_RATE, MAX_ITERATIONS,
};
pub use runner::{
    monte_carlo, prepare_inputs, run_single, sweep_population, write_aggregate, write_per_seed, write_scatter,
    AggregateRow, AnySynapse, DeviceBackend, DeviceSource, ExperimentConfig, FitMode, RunResult, SeedResult,
    Variant,
};
