use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use log::{info, warn};
use rayon::prelude::*;

use dwpop::datasets::{load_mouse_protein, synthetic_mouse_like, Dataset, ProteinSelection};
use dwpop::device::{generate_device_library, read_library, write_library, DeviceResponseTrace};
use dwpop::experiments::{
    monte_carlo, run_single, sweep_population, write_aggregate, write_per_seed, write_scatter, DeviceSource,
    RunResult, Variant,
};
use dwpop::micromag::{find_critical_current, generate_voronoi_grains, measure_velocity, VelocityProbe, WireModel};
use dwpop::Error;

use crate::config::{Config, DatasetSource};

/// Pulse counts at which `calibrate` tabulates the wall-position spread.
pub const CHECKPOINTS: [usize; 4] = [15, 30, 45, 60];

/// A problem with the invocation itself rather than with a computation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Writes output tables into one directory, each starting with the same
/// provenance comment.
pub struct Output {
    dir: PathBuf,
    provenance: String,
}

impl Output {
    pub fn new(dir: &Path, command: &str, cfg: &Config, seeds: &[u64]) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let provenance = format!(
            "# dwpop {} command={command} config={} seeds={}",
            env!("CARGO_PKG_VERSION"),
            cfg.hash(),
            format_seeds(seeds)
        );
        Ok(Self {
            dir: dir.to_path_buf(),
            provenance,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Creates `name` and writes the provenance line.
    pub fn create(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(w, "{}", self.provenance)?;
        Ok(w)
    }
}

/// Compact seed list: runs of consecutive seeds become `a-b`.
pub fn format_seeds(seeds: &[u64]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < seeds.len() {
        let mut j = i;
        while j + 1 < seeds.len() && seeds[j + 1] == seeds[j] + 1 {
            j += 1;
        }
        parts.push(if j > i {
            format!("{}-{}", seeds[i], seeds[j])
        } else {
            seeds[i].to_string()
        });
        i = j + 1;
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join(";")
    }
}

pub fn load_dataset(cfg: &Config) -> anyhow::Result<Dataset> {
    let d = &cfg.dataset;
    match d.source {
        DatasetSource::File => {
            let path = d
                .path
                .as_ref()
                .ok_or_else(|| usage("no dataset path: pass --dataset PATH or set [dataset] path"))?;
            let selection = if d.proteins.is_empty() {
                ProteinSelection::default()
            } else {
                ProteinSelection::Named(d.proteins.clone())
            };
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let data = load_mouse_protein(BufReader::new(file), &selection, d.seed)?;
            info!("{}", data.provenance.summary());
            Ok(data)
        }
        DatasetSource::SyntheticMouseLike => Ok(synthetic_mouse_like(d.seed)),
    }
}

fn load_devices(cfg: &Config) -> anyhow::Result<Option<DeviceSource>> {
    if cfg.experiment.variant == Variant::Ideal {
        return Ok(None);
    }
    let path = cfg
        .library
        .path
        .as_ref()
        .ok_or_else(|| usage("device-backed variants need [library] path (run `calibrate` first)"))?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let traces = read_library(BufReader::new(file))?;
    if traces.is_empty() {
        bail!("device library {} holds no devices", path.display());
    }
    Ok(Some(DeviceSource {
        traces: traces.into_iter().map(Arc::new).collect(),
        live: Some(cfg.library_spec()),
    }))
}

fn write_dataset_provenance(out: &Output, data: &Dataset) -> anyhow::Result<()> {
    let mut w = out.create("dataset_provenance.txt")?;
    writeln!(w, "{}", data.provenance.summary())?;
    w.flush()?;
    Ok(())
}

/// Velocity-versus-current table per tilt spread, plus the bisected
/// critical current. Rows are flushed as they complete.
pub fn velocity(cfg: &Config, out: &Output) -> anyhow::Result<()> {
    let v = &cfg.velocity;
    if v.currents.is_empty() {
        return Err(usage("velocity needs a non-empty [velocity] currents grid"));
    }
    let mut failed = 0usize;
    let mut vel = out.create("velocity.csv")?;
    writeln!(vel, "delta_theta,J,velocity")?;
    let mut jc = out.create("critical_current.csv")?;
    writeln!(jc, "delta_theta,seed,J_c,status")?;
    let probe = VelocityProbe {
        start_x: Some(v.start_x),
        ..VelocityProbe::default()
    };
    for &dt in &cfg.disorder.delta_thetas {
        let grains = generate_voronoi_grains(&cfg.geometry, cfg.disorder.mean_grain_diameter, dt, cfg.disorder.seed)?;
        let model = WireModel::new(cfg.geometry.clone(), cfg.material.clone(), grains)?;
        let rows: Vec<(f64, dwpop::Result<f64>)> = v
            .currents
            .par_iter()
            .map(|&j| (j, measure_velocity(&model, j, v.settle_time, v.measure_time, &cfg.solver, &probe)))
            .collect();
        for (j, r) in rows {
            match r {
                Ok(speed) => writeln!(vel, "{dt},{j},{speed}")?,
                Err(e) => {
                    warn!("velocity at delta_theta={dt}, J={j:e} failed: {e}");
                    failed += 1;
                    writeln!(vel, "{dt},{j},")?;
                }
            }
        }
        vel.flush()?;
        let (value, status) = match find_critical_current(&model, v.j_lo, v.j_hi, v.j_tol, &v.criterion(), &cfg.solver) {
            Ok(j) => (j.to_string(), "bisected"),
            Err(Error::Bracket(msg)) if msg.contains("already moves") => (String::new(), "below_range"),
            Err(Error::Bracket(msg)) if msg.contains("still pinned") => (String::new(), "above_range"),
            Err(e) => {
                warn!("critical current at delta_theta={dt} failed: {e}");
                failed += 1;
                (String::new(), "failed")
            }
        };
        writeln!(jc, "{dt},{},{value},{status}", cfg.disorder.seed)?;
        jc.flush()?;
        info!("delta_theta={dt}: J_c {status} {value}");
    }
    if failed > 0 {
        bail!("{failed} velocity computations failed");
    }
    Ok(())
}

/// Generates the device library and the wall-position tables.
pub fn calibrate(cfg: &Config, out: &Output) -> anyhow::Result<Vec<DeviceResponseTrace>> {
    let spec = cfg.library_spec();
    info!("recording {} devices at delta_theta={}", spec.count, spec.delta_theta);
    let traces = generate_device_library(&spec)?;
    let mut lib = out.create("device_library.txt")?;
    write_library(&traces, &mut lib)?;
    lib.flush()?;
    write_positions(out, &traces)?;
    let stuck: Vec<usize> = traces.iter().filter(|t| t.stuck).map(|t| t.device_id).collect();
    if !stuck.is_empty() {
        warn!("stuck devices (flagged in the library): {stuck:?}");
    }
    Ok(traces)
}

fn write_positions(out: &Output, traces: &[DeviceResponseTrace]) -> anyhow::Result<()> {
    for (name, forward) in [("positions_forward.csv", true), ("positions_backward.csv", false)] {
        let mut w = out.create(name)?;
        writeln!(w, "pulses,device_id,x_nm")?;
        for &k in &CHECKPOINTS {
            for t in traces {
                let x = if forward {
                    t.forward_position(k)
                } else {
                    t.backward_position(k)
                };
                writeln!(w, "{k},{},{x}", t.device_id)?;
            }
        }
        w.flush()?;
    }
    let mut w = out.create("device_summary.csv")?;
    writeln!(w, "device_id,seed,slope,forward_pulses,backward_pulses,stuck")?;
    for t in traces {
        let (f, b) = t.pulse_counts();
        writeln!(w, "{},{},{},{f},{b},{}", t.device_id, t.seed, t.slope, t.stuck)?;
    }
    w.flush()?;
    Ok(())
}

/// One seed of the configured variant.
pub fn train(cfg: &Config, out: &Output) -> anyhow::Result<()> {
    let seed = *cfg
        .experiment
        .seeds
        .first()
        .ok_or_else(|| usage("train needs at least one seed"))?;
    let data = load_dataset(cfg)?;
    let devices = load_devices(cfg)?;
    let r = run_single(&cfg.experiment, &data, devices.as_ref(), seed)?;
    write_dataset_provenance(out, &data)?;

    let mut w = out.create("training_trace.csv")?;
    r.trace.write_csv(&mut w)?;
    w.flush()?;

    let mut w = out.create("scatter.csv")?;
    write_scatter(&r, None, &mut w)?;
    w.flush()?;

    let mut w = out.create("accuracy_trace.csv")?;
    writeln!(w, "step,accuracy")?;
    for (step, acc) in &r.accuracy_trace {
        writeln!(w, "{step},{acc}")?;
    }
    w.flush()?;

    let mut w = out.create("result.csv")?;
    writeln!(w, "seed,accuracy,norm1,norm2,angle,boundary_w1,boundary_w2,boundary_b")?;
    let angle = r.diagnostics.angle_deg.map(|a| a.to_string()).unwrap_or_default();
    writeln!(
        w,
        "{seed},{},{},{},{angle},{},{},{}",
        r.accuracy, r.diagnostics.norm1, r.diagnostics.norm2, r.boundary.w[0], r.boundary.w[1], r.boundary.b
    )?;
    w.flush()?;
    info!(
        "seed {seed}: accuracy {:.3}, |w1| {:.3}, |w2| {:.3}, angle {angle}",
        r.accuracy, r.diagnostics.norm1, r.diagnostics.norm2
    );
    Ok(())
}

fn write_run(out: &Output, result: &RunResult, suffix: &str) -> anyhow::Result<()> {
    let mut w = out.create(&format!("per_seed{suffix}.csv"))?;
    write_per_seed(result, None, &mut w)?;
    w.flush()?;
    let mut w = out.create(&format!("aggregate{suffix}.csv"))?;
    write_aggregate(result, None, &mut w)?;
    w.flush()?;
    if !result.failures.is_empty() {
        let mut w = out.create(&format!("failures{suffix}.csv"))?;
        writeln!(w, "seed,error")?;
        for (s, e) in &result.failures {
            writeln!(w, "{s},\"{}\"", e.replace('"', "'"))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn check_seeds(cfg: &Config) -> anyhow::Result<()> {
    if cfg.experiment.seeds.is_empty() {
        return Err(usage("no seeds configured"));
    }
    Ok(())
}

/// Monte Carlo over the configured seeds.
pub fn montecarlo(cfg: &Config, out: &Output) -> anyhow::Result<()> {
    check_seeds(cfg)?;
    let data = load_dataset(cfg)?;
    let devices = load_devices(cfg)?;
    let result = monte_carlo(&cfg.experiment, &data, devices.as_ref())?;
    write_dataset_provenance(out, &data)?;
    write_run(out, &result, "")?;
    info!(
        "{} seeds: mean accuracy {:.4} ± {:.4}",
        result.per_seed.len(),
        result.mean_accuracy(),
        result.std_accuracy()
    );
    if !result.failures.is_empty() {
        bail!("{} of {} seeds failed", result.failures.len(), cfg.experiment.seeds.len());
    }
    Ok(())
}

/// Monte Carlo at every configured population size, matched seeds.
pub fn sweep(cfg: &Config, out: &Output) -> anyhow::Result<()> {
    check_seeds(cfg)?;
    if cfg.experiment.variant != Variant::Population {
        return Err(usage("sweep-population needs [experiment] variant = \"population\""));
    }
    let mut sizes = cfg.sweep.population_sizes.clone();
    if sizes.is_empty() {
        return Err(usage("no population sizes configured"));
    }
    sizes.sort_unstable();
    let data = load_dataset(cfg)?;
    let devices = load_devices(cfg)?;
    let results = sweep_population(&cfg.experiment, &data, devices.as_ref(), &sizes)?;
    write_dataset_provenance(out, &data)?;
    let mut summary = out.create("population_sweep.csv")?;
    writeln!(summary, "n,mean_acc,std_acc,count,failed")?;
    let mut failed = 0;
    for (n, r) in sizes.iter().zip(&results) {
        write_run(out, r, &format!("_n{n}"))?;
        writeln!(
            summary,
            "{n},{},{},{},{}",
            r.mean_accuracy(),
            r.std_accuracy(),
            r.per_seed.len(),
            r.failures.len()
        )?;
        failed += r.failures.len();
    }
    summary.flush()?;
    if failed > 0 {
        bail!("{failed} seed runs failed across the sweep");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists_compress_runs() {
        assert_eq!(format_seeds(&[0, 1, 2, 3]), "0-3");
        assert_eq!(format_seeds(&[5, 7, 8, 10]), "5;7-8;10");
        assert_eq!(format_seeds(&[]), "none");
    }

    #[test]
    fn missing_dataset_path_is_a_usage_error() {
        let cfg = Config::default();
        let err = load_dataset(&cfg).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
