//! TOML configuration: one file drives one command. Every field has a
//! default, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dwpop::device::LibrarySpec;
use dwpop::experiments::ExperimentConfig;
use dwpop::micromag::{DepinningCriterion, DriveSpec, MaterialParams, SolverSettings, WireGeometry};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Directory that receives every output table.
    pub output_dir: Option<PathBuf>,
    pub material: MaterialParams,
    pub geometry: WireGeometry,
    pub drive: DriveSpec,
    pub solver: SolverSettings,
    pub disorder: DisorderConfig,
    pub velocity: VelocityConfig,
    pub library: LibraryConfig,
    pub dataset: DatasetConfig,
    pub experiment: ExperimentConfig,
    pub sweep: SweepConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisorderConfig {
    /// Tilt spreads (degrees) swept by `velocity`.
    pub delta_thetas: Vec<f64>,
    /// Grain seed for the velocity sweep wires.
    pub seed: u64,
    /// nm
    pub mean_grain_diameter: f64,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        Self {
            delta_thetas: vec![0.0, 6.0, 8.0, 10.0],
            seed: 1,
            mean_grain_diameter: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VelocityConfig {
    /// Current densities (A/m²).
    pub currents: Vec<f64>,
    /// ns
    pub settle_time: f64,
    /// ns
    pub measure_time: f64,
    /// Initial wall position (nm).
    pub start_x: f64,
    /// Critical-current bracket and resolution (A/m²).
    pub j_lo: f64,
    pub j_hi: f64,
    pub j_tol: f64,
    /// Distance (nm) that counts as depinned, and the time budget (ns).
    pub travel: f64,
    pub budget: f64,
}

impl Default for VelocityConfig {
    fn default() -> Self {
        Self {
            currents: vec![0.5e12, 1.0e12, 1.5e12, 2.0e12, 2.5e12, 3.0e12],
            settle_time: 1.0,
            measure_time: 2.0,
            start_x: 300.0,
            j_lo: 0.3e12,
            j_hi: 3.0e12,
            j_tol: 0.05e12,
            travel: 200.0,
            budget: 20.0,
        }
    }
}

impl VelocityConfig {
    pub fn criterion(&self) -> DepinningCriterion {
        DepinningCriterion {
            travel: self.travel,
            budget: self.budget,
            start_x: Some(self.start_x),
            ..DepinningCriterion::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LibraryConfig {
    pub count: usize,
    /// degrees
    pub delta_theta: f64,
    pub seed_base: u64,
    /// Existing device library used by `train`, `montecarlo` and
    /// `sweep-population`; `calibrate` writes its library into the output
    /// directory instead.
    pub path: Option<PathBuf>,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        let d = LibrarySpec::default();
        Self {
            count: d.count,
            delta_theta: d.delta_theta,
            seed_base: d.seed_base,
            path: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    /// The mouse protein expression table, read from `path`.
    #[default]
    File,
    /// A generated stand-in with the same shape (300 samples, 4 features).
    SyntheticMouseLike,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    pub path: Option<PathBuf>,
    /// Explicit protein columns; empty picks the most separating ones.
    pub proteins: Vec<String>,
    /// Seed for the train/test split (and for the synthetic stand-in).
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub population_sizes: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            population_sizes: vec![4, 8, 20],
        }
    }
}

impl Config {
    /// Reads and validates a configuration file. Relative paths inside the
    /// file are resolved against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        rebase(&mut cfg.output_dir);
        rebase(&mut cfg.dataset.path);
        rebase(&mut cfg.library.path);
        Ok(cfg)
    }

    /// Checks parameter ranges and that every referenced input file exists.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.material.validate()?;
        self.geometry.validate()?;
        self.drive.validate()?;
        if self.disorder.delta_thetas.iter().any(|d| !(*d >= 0.0)) {
            bail!("delta_thetas must be non-negative");
        }
        if !(self.disorder.mean_grain_diameter >= self.geometry.cell_size) {
            bail!("mean grain diameter must be at least one cell");
        }
        for p in [&self.dataset.path, &self.library.path].into_iter().flatten() {
            if !p.is_file() {
                bail!("referenced file {} does not exist", p.display());
            }
        }
        Ok(())
    }

    pub fn library_spec(&self) -> LibrarySpec {
        LibrarySpec {
            count: self.library.count,
            delta_theta: self.library.delta_theta,
            seed_base: self.library.seed_base,
            mean_grain_diameter: self.disorder.mean_grain_diameter,
            geometry: self.geometry.clone(),
            params: self.material.clone(),
            drive: self.drive.clone(),
            settings: self.solver.clone(),
        }
    }

    /// Short digest of the resolved configuration, excluding where the
    /// outputs go.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let text = toml::to_string(&c).unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
