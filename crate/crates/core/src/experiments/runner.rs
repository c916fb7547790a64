use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::{logistic_fit, score, Boundary};
use crate::datasets::{normalize, Dataset};
use crate::device::{DeviceResponseTrace, DomainWallSynapse, IdealSynapse, LibrarySpec, Synapse, WireDevice};
use crate::encoding::{encode_sample, PopulationEncoder, DEFAULT_VARIANCE};
use crate::error::{Error, Result};
use crate::micromag::{generate_voronoi_grains, WireModel};
use crate::pca::{Crossbar, Diagnostics, TrainingTrace, DEFAULT_LEARNING_RATE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Exact, unbounded weights.
    Ideal,
    /// Domain-wall synapses fed the raw features.
    Disordered,
    /// Domain-wall synapses fed population-coded features.
    Population,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceBackend {
    Surrogate,
    Micromagnetic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    /// Fit and score the classifier on the test-sample components.
    TestInSample,
    /// Fit on the training samples, score on the test samples.
    TrainFitTestScore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub n_population: usize,
    pub encoder_spacing: f64,
    pub encoder_variance: f64,
    pub backend: DeviceBackend,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub learning_rate: f64,
    pub checkpoint_every: usize,
    pub fit_mode: FitMode,
    /// Carry the sub-pulse remainder of each device write into the next
    /// request instead of dropping it.
    pub accumulate_writes: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Ideal,
            n_population: 8,
            encoder_spacing: 1.0,
            encoder_variance: DEFAULT_VARIANCE,
            backend: DeviceBackend::Surrogate,
            seeds: (0..500).collect(),
            steps: 1500,
            learning_rate: DEFAULT_LEARNING_RATE,
            checkpoint_every: 25,
            fit_mode: FitMode::TestInSample,
            accumulate_writes: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.variant == Variant::Population && self.n_population < 2 {
            return Err(Error::InvalidParameter(format!(
                "population variant needs n ≥ 2, got {}",
                self.n_population
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("no seeds configured".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidParameter("checkpoint interval must be > 0".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Device population to draw synapses from. `live` is needed only for the
/// micromagnetic backend, which rebuilds each sampled wire from its seed.
#[derive(Clone, Debug)]
pub struct DeviceSource {
    pub traces: Vec<Arc<DeviceResponseTrace>>,
    pub live: Option<LibrarySpec>,
}

impl DeviceSource {
    pub fn from_traces(traces: Vec<DeviceResponseTrace>) -> Self {
        Self {
            traces: traces.into_iter().map(Arc::new).collect(),
            live: None,
        }
    }
}

/// Either kind of synapse, so one crossbar type serves every variant.
#[derive(Clone, Debug)]
pub enum AnySynapse {
    Ideal(IdealSynapse),
    Wall(DomainWallSynapse),
}

impl Synapse for AnySynapse {
    fn read_weight(&self) -> f64 {
        match self {
            AnySynapse::Ideal(s) => s.read_weight(),
            AnySynapse::Wall(s) => s.read_weight(),
        }
    }

    fn write_delta(&mut self, requested: f64) -> Result<f64> {
        match self {
            AnySynapse::Ideal(s) => s.write_delta(requested),
            AnySynapse::Wall(s) => s.write_delta(requested),
        }
    }

    fn randomize_weight(&mut self, target: f64) -> Result<f64> {
        match self {
            AnySynapse::Ideal(s) => s.randomize_weight(target),
            AnySynapse::Wall(s) => s.randomize_weight(target),
        }
    }
}

/// Everything recorded for one seed.
#[derive(Clone, Debug)]
pub struct SeedResult {
    pub seed: u64,
    pub accuracy: f64,
    pub diagnostics: Diagnostics,
    pub boundary: Boundary,
    /// Test-sample components with their labels.
    pub pcs: Vec<([f64; 2], bool)>,
    /// (step, accuracy) at every checkpoint, starting at step 0.
    pub accuracy_trace: Vec<(usize, f64)>,
    pub trace: TrainingTrace,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateRow {
    pub step: usize,
    pub mean: f64,
    /// Population standard deviation over the completed seeds.
    pub std: f64,
    pub count: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub variant: Variant,
    pub n_population: Option<usize>,
    pub per_seed: Vec<SeedResult>,
    pub failures: Vec<(u64, String)>,
    pub aggregate: Vec<AggregateRow>,
}

impl RunResult {
    pub fn mean_accuracy(&self) -> f64 {
        mean_std(self.per_seed.iter().map(|r| r.accuracy)).0
    }

    pub fn std_accuracy(&self) -> f64 {
        mean_std(self.per_seed.iter().map(|r| r.accuracy)).1
    }
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Network inputs for the train and test splits. Raw features are scaled to
/// [−1, 1]; for the population variant each feature is scaled onto its
/// encoder's reception field and expanded to n responses.
pub fn prepare_inputs(config: &ExperimentConfig, data: &Dataset) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Dataset)> {
    match config.variant {
        Variant::Ideal | Variant::Disordered => {
            let d = normalize(data, -1.0, 1.0)?;
            Ok((d.train_features(), d.test_features(), d))
        }
        Variant::Population => {
            let enc = PopulationEncoder::new(config.n_population, config.encoder_spacing, config.encoder_variance)?;
            let (lo, hi) = enc.reception_field();
            let d = normalize(data, lo, hi)?;
            let encoders = vec![enc; d.dim()];
            let encode = |rows: Vec<Vec<f64>>| -> Result<Vec<Vec<f64>>> {
                rows.iter().map(|r| encode_sample(&encoders, r)).collect()
            };
            Ok((encode(d.train_features())?, encode(d.test_features())?, d))
        }
    }
}

fn build_crossbar(
    config: &ExperimentConfig,
    rows: usize,
    devices: Option<&DeviceSource>,
    seed: u64,
) -> Result<Crossbar<AnySynapse>> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed);
    pick.set_stream(1);
    let mut synapses = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut pair = Vec::with_capacity(2);
        for _ in 0..2 {
            let s = match config.variant {
                Variant::Ideal => AnySynapse::Ideal(IdealSynapse::unbounded(0.0)),
                Variant::Disordered | Variant::Population => {
                    let src = devices.ok_or_else(|| {
                        Error::InvalidParameter("device-backed variant needs a device library".into())
                    })?;
                    if src.traces.is_empty() {
                        return Err(Error::InsufficientData("device library is empty".into()));
                    }
                    let trace = &src.traces[pick.random_range(0..src.traces.len())];
                    AnySynapse::Wall(make_wall_synapse(config, src, trace)?.accumulating(config.accumulate_writes))
                }
            };
            pair.push(s);
        }
        let b = pair.pop().unwrap();
        let a = pair.pop().unwrap();
        synapses.push([a, b]);
    }
    let mut xbar = Crossbar::new(synapses, config.learning_rate)?;
    let mut init = ChaCha8Rng::seed_from_u64(seed);
    init.set_stream(2);
    xbar.randomize(&mut init)?;
    Ok(xbar)
}

fn make_wall_synapse(
    config: &ExperimentConfig,
    src: &DeviceSource,
    trace: &Arc<DeviceResponseTrace>,
) -> Result<DomainWallSynapse> {
    match config.backend {
        DeviceBackend::Surrogate => {
            let drive = src.live.as_ref().map(|l| l.drive.clone()).unwrap_or_default();
            Ok(DomainWallSynapse::make_surrogate(Arc::clone(trace), drive))
        }
        DeviceBackend::Micromagnetic => {
            let spec = src
                .live
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("micromagnetic backend needs the library spec".into()))?;
            let grains =
                generate_voronoi_grains(&spec.geometry, spec.mean_grain_diameter, trace.delta_theta, trace.seed)?;
            let model = WireModel::new(spec.geometry.clone(), spec.params.clone(), grains)?;
            let dev = WireDevice::left_saturated(Arc::new(model), &spec.settings)?;
            DomainWallSynapse::live(dev, trace.slope, spec.drive.clone(), trace.device_id)
        }
    }
}

fn evaluate(
    config: &ExperimentConfig,
    xbar: &Crossbar<AnySynapse>,
    train: &[Vec<f64>],
    train_labels: &[bool],
    test: &[Vec<f64>],
    test_labels: &[bool],
) -> Result<(f64, Boundary, Vec<[f64; 2]>)> {
    let project = |rows: &[Vec<f64>]| rows.iter().map(|x| xbar.forward(x)).collect::<Result<Vec<_>>>();
    let test_pcs = project(test)?;
    let boundary = match config.fit_mode {
        FitMode::TestInSample => logistic_fit(&test_pcs, test_labels)?.boundary,
        FitMode::TrainFitTestScore => logistic_fit(&project(train)?, train_labels)?.boundary,
    };
    Ok((score(&boundary, &test_pcs, test_labels), boundary, test_pcs))
}

/// Trains one crossbar from `seed` and scores it on the test split.
pub fn run_single(
    config: &ExperimentConfig,
    data: &Dataset,
    devices: Option<&DeviceSource>,
    seed: u64,
) -> Result<SeedResult> {
    config.validate()?;
    let (train, test, scaled) = prepare_inputs(config, data)?;
    run_prepared(config, &train, &test, &scaled, devices, seed)
}

fn run_prepared(
    config: &ExperimentConfig,
    train: &[Vec<f64>],
    test: &[Vec<f64>],
    scaled: &Dataset,
    devices: Option<&DeviceSource>,
    seed: u64,
) -> Result<SeedResult> {
    let train_labels = scaled.train_labels();
    let test_labels = scaled.test_labels();
    let rows = train.first().map(|r| r.len()).unwrap_or(0);
    let mut xbar = build_crossbar(config, rows, devices, seed)?;

    let mut accuracy_trace = Vec::new();
    let (acc0, _, _) = evaluate(config, &xbar, train, &train_labels, test, &test_labels)?;
    accuracy_trace.push((0, acc0));
    let every = config.checkpoint_every;
    let steps = config.steps;
    let trace = xbar.train_with(train, steps, seed ^ 0x9e37_79b9_7f4a_7c15, |step, xb| {
        if step % every == 0 && step != steps {
            let (acc, _, _) = evaluate(config, xb, train, &train_labels, test, &test_labels)?;
            accuracy_trace.push((step, acc));
        }
        Ok(())
    })?;
    let (accuracy, boundary, pcs) = evaluate(config, &xbar, train, &train_labels, test, &test_labels)?;
    if steps > 0 {
        accuracy_trace.push((steps, accuracy));
    }
    Ok(SeedResult {
        seed,
        accuracy,
        diagnostics: xbar.weight_diagnostics(),
        boundary,
        pcs: pcs.into_iter().zip(test_labels).collect(),
        accuracy_trace,
        trace,
    })
}

/// Runs every configured seed (in parallel) and aggregates accuracy per
/// checkpoint over the seeds that completed.
pub fn monte_carlo(config: &ExperimentConfig, data: &Dataset, devices: Option<&DeviceSource>) -> Result<RunResult> {
    config.validate()?;
    let (train, test, scaled) = prepare_inputs(config, data)?;
    let outcomes: Vec<(u64, Result<SeedResult>)> = config
        .seeds
        .par_iter()
        .map(|&s| (s, run_prepared(config, &train, &test, &scaled, devices, s)))
        .collect();
    let mut per_seed = Vec::new();
    let mut failures = Vec::new();
    for (s, r) in outcomes {
        match r {
            Ok(r) => per_seed.push(r),
            Err(e) => {
                log::warn!("seed {s} failed: {e}");
                failures.push((s, e.to_string()));
            }
        }
    }
    let aggregate = match per_seed.first() {
        None => Vec::new(),
        Some(first) => first
            .accuracy_trace
            .iter()
            .enumerate()
            .map(|(k, &(step, _))| {
                let (mean, std) = mean_std(per_seed.iter().map(|r| r.accuracy_trace[k].1));
                AggregateRow {
                    step,
                    mean,
                    std,
                    count: per_seed.len(),
                }
            })
            .collect(),
    };
    Ok(RunResult {
        variant: config.variant,
        n_population: (config.variant == Variant::Population).then_some(config.n_population),
        per_seed,
        failures,
        aggregate,
    })
}

/// [`monte_carlo`] for each population size, with the same seeds (and so the
/// same leading device draws) at every size.
pub fn sweep_population(
    config: &ExperimentConfig,
    data: &Dataset,
    devices: Option<&DeviceSource>,
    n_values: &[usize],
) -> Result<Vec<RunResult>> {
    if config.variant != Variant::Population {
        return Err(Error::InvalidParameter("population sweep needs the population variant".into()));
    }
    if n_values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("population sizes must be sorted".into()));
    }
    n_values
        .iter()
        .map(|&n| {
            let cfg = ExperimentConfig {
                n_population: n,
                ..config.clone()
            };
            monte_carlo(&cfg, data, devices)
        })
        .collect()
}

fn comment_line<W: Write>(out: &mut W, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    Ok(())
}

/// `seed,final_accuracy,norm1,norm2,angle`
pub fn write_per_seed<W: Write>(result: &RunResult, comment: Option<&str>, mut out: W) -> Result<()> {
    comment_line(&mut out, comment)?;
    writeln!(out, "seed,final_accuracy,norm1,norm2,angle")?;
    for r in &result.per_seed {
        let angle = r.diagnostics.angle_deg.map(|a| a.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            r.seed, r.accuracy, r.diagnostics.norm1, r.diagnostics.norm2, angle
        )?;
    }
    Ok(())
}

/// `step,mean_acc,std_acc`
pub fn write_aggregate<W: Write>(result: &RunResult, comment: Option<&str>, mut out: W) -> Result<()> {
    comment_line(&mut out, comment)?;
    writeln!(out, "step,mean_acc,std_acc")?;
    for a in &result.aggregate {
        writeln!(out, "{},{},{}", a.step, a.mean, a.std)?;
    }
    Ok(())
}

/// `pc1,pc2,label` with label 1 for stimulated.
pub fn write_scatter<W: Write>(result: &SeedResult, comment: Option<&str>, mut out: W) -> Result<()> {
    comment_line(&mut out, comment)?;
    writeln!(out, "pc1,pc2,label")?;
    for (p, l) in &result.pcs {
        writeln!(out, "{},{},{}", p[0], p[1], u8::from(*l))?;
    }
    Ok(())
}
