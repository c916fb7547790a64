//! Binary-classification datasets: the mouse protein-expression table,
//! train-only normalization, and synthetic fixtures.

use std::fmt::Write as _;
use std::io::Read;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Per-feature affine map from the train-split range `[min, max]` onto
/// `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureScaling {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub lo: f64,
    pub hi: f64,
}

impl FeatureScaling {
    pub fn apply(&self, v: f64) -> f64 {
        self.lo + (v - self.min) * (self.hi - self.lo) / (self.max - self.min)
    }
}

/// How a dataset was produced; emitted next to every result table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub source: String,
    pub rows_read: usize,
    pub rows_kept: usize,
    pub features: Vec<String>,
    pub seed: u64,
    pub scaling: Vec<FeatureScaling>,
    pub notes: Vec<String>,
}

impl Provenance {
    /// One-line `key=value` summary, suitable for a `#` comment.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "source={} rows_read={} rows_kept={} seed={} features={}",
            self.source,
            self.rows_read,
            self.rows_kept,
            self.seed,
            self.features.join("|")
        );
        for sc in &self.scaling {
            let _ = write!(s, " scale[{}]=[{},{}]->[{},{}]", sc.name, sc.min, sc.max, sc.lo, sc.hi);
        }
        for n in &self.notes {
            let _ = write!(s, " note={n:?}");
        }
        s
    }
}

/// Samples with boolean labels (true = stimulated) and a fixed train/test split.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub feature_names: Vec<String>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn train_features(&self) -> Vec<Vec<f64>> {
        self.train.iter().map(|&i| self.features[i].clone()).collect()
    }

    pub fn test_features(&self) -> Vec<Vec<f64>> {
        self.test.iter().map(|&i| self.features[i].clone()).collect()
    }

    pub fn train_labels(&self) -> Vec<bool> {
        self.train.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn test_labels(&self) -> Vec<bool> {
        self.test.iter().map(|&i| self.labels[i]).collect()
    }

    /// Checks shapes, finiteness, split disjointness and class presence.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.labels.len() != self.features.len() {
            return Err(Error::Shape {
                expected: self.features.len(),
                got: self.labels.len(),
            });
        }
        for f in &self.features {
            if f.len() != d {
                return Err(Error::Shape { expected: d, got: f.len() });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedTable("non-finite feature value".into()));
            }
        }
        let mut seen = vec![false; self.len()];
        for &i in self.train.iter().chain(&self.test) {
            if i >= self.len() || seen[i] {
                return Err(Error::InvalidParameter(format!("split index {i} out of range or repeated")));
            }
            seen[i] = true;
        }
        for (name, idx) in [("train", &self.train), ("test", &self.test)] {
            for want in [true, false] {
                if !idx.iter().any(|&i| self.labels[i] == want) {
                    return Err(Error::EmptyClass(format!("{name} split has no label={want} samples")));
                }
            }
        }
        Ok(())
    }
}

/// Splits indices in half per label, shuffled by `seed`. Odd class counts
/// alternate which side gets the extra sample so the totals stay balanced.
pub fn stratified_split(labels: &[bool], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    let mut extra_to_train = true;
    for want in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == want).collect();
        idx.shuffle(&mut rng);
        let mut k = idx.len() / 2;
        if idx.len() % 2 == 1 {
            if extra_to_train {
                k += 1;
            }
            extra_to_train = !extra_to_train;
        }
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Which four proteins to use.
#[derive(Clone, Debug, PartialEq)]
pub enum ProteinSelection {
    /// The four with the largest |standardized mean difference| between
    /// labels on the train split.
    MostSeparating(usize),
    Named(Vec<String>),
}

impl Default for ProteinSelection {
    fn default() -> Self {
        ProteinSelection::MostSeparating(4)
    }
}

const EXPECTED_ROWS: usize = 300;

fn find_col(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::MalformedTable(format!("missing column `{name}`")))
}

/// Reads the mouse protein-expression table (comma-separated, header row:
/// MouseID, protein columns, Genotype, Treatment, Behavior, class).
///
/// Keeps memantine-treated rows, labels context-shock behaviour as
/// stimulated, splits 50/50 stratified by label, imputes missing values with
/// train-split means, then selects proteins.
pub fn load_mouse_protein<R: Read>(raw: R, selection: &ProteinSelection, seed: u64) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(raw);
    let headers = rdr.headers()?.clone();
    let id_col = find_col(&headers, "MouseID")?;
    let geno_col = find_col(&headers, "Genotype")?;
    let treat_col = find_col(&headers, "Treatment")?;
    let behav_col = find_col(&headers, "Behavior")?;
    let meta = [id_col, geno_col, treat_col, behav_col];
    let class_col = headers.iter().position(|h| h.trim().eq_ignore_ascii_case("class"));
    let protein_cols: Vec<usize> = (0..headers.len())
        .filter(|c| !meta.contains(c) && Some(*c) != class_col)
        .collect();
    if protein_cols.is_empty() {
        return Err(Error::MalformedTable("no protein columns".into()));
    }

    let mut rows_read = 0;
    let mut values: Vec<Vec<Option<f64>>> = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows_read += 1;
        if !rec[treat_col].trim().eq_ignore_ascii_case("memantine") {
            continue;
        }
        let behaviour = rec[behav_col].trim().to_ascii_uppercase();
        let label = match behaviour.as_str() {
            "C/S" | "CS" => true,
            "S/C" | "SC" => false,
            other => return Err(Error::MalformedTable(format!("unknown behavior `{other}` at row {rows_read}"))),
        };
        let row = protein_cols
            .iter()
            .map(|&c| {
                let s = rec[c].trim();
                if s.is_empty() || s.eq_ignore_ascii_case("nan") {
                    Ok(None)
                } else {
                    s.parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::MalformedTable(format!("row {rows_read}: bad value `{s}`")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        values.push(row);
        labels.push(label);
    }
    for want in [true, false] {
        if !labels.iter().any(|&l| l == want) {
            return Err(Error::EmptyClass(format!(
                "no memantine rows with {} behaviour",
                if want { "context-shock" } else { "shock-context" }
            )));
        }
    }
    let mut notes = Vec::new();
    if values.len() != EXPECTED_ROWS {
        log::warn!("memantine filter kept {} rows, expected {EXPECTED_ROWS}", values.len());
        notes.push(format!("filter kept {} rows instead of {EXPECTED_ROWS}", values.len()));
    }

    let (train, test) = stratified_split(&labels, seed);
    let names: Vec<String> = protein_cols.iter().map(|&c| headers[c].trim().to_string()).collect();

    // train-split means for imputation
    let mut filled: Vec<Vec<f64>> = vec![Vec::with_capacity(names.len()); values.len()];
    for c in 0..names.len() {
        let present: Vec<f64> = train.iter().filter_map(|&i| values[i][c]).collect();
        let mean = if present.is_empty() {
            None
        } else {
            Some(present.iter().sum::<f64>() / present.len() as f64)
        };
        for (i, row) in values.iter().enumerate() {
            let v = match (row[c], mean) {
                (Some(v), _) => v,
                (None, Some(m)) => m,
                (None, None) => f64::NAN,
            };
            filled[i].push(v);
        }
    }

    let chosen: Vec<usize> = match selection {
        ProteinSelection::Named(list) => list
            .iter()
            .map(|n| {
                names
                    .iter()
                    .position(|h| h.eq_ignore_ascii_case(n))
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown protein `{n}`")))
            })
            .collect::<Result<_>>()?,
        ProteinSelection::MostSeparating(k) => {
            let mut scored: Vec<(usize, f64)> = (0..names.len())
                .filter(|&c| filled.iter().all(|r| r[c].is_finite()))
                .map(|c| (c, separation(&filled, &labels, &train, c)))
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            scored.iter().take(*k).map(|p| p.0).collect()
        }
    };
    if chosen.is_empty() {
        return Err(Error::InvalidParameter("no proteins selected".into()));
    }
    let features: Vec<Vec<f64>> = filled.iter().map(|r| chosen.iter().map(|&c| r[c]).collect()).collect();
    let feature_names: Vec<String> = chosen.iter().map(|&c| names[c].clone()).collect();
    let ds = Dataset {
        features,
        labels,
        train,
        test,
        provenance: Provenance {
            source: "mouse-protein".into(),
            rows_read,
            rows_kept: values.len(),
            features: feature_names.clone(),
            seed,
            scaling: Vec::new(),
            notes,
        },
        feature_names,
    };
    ds.validate()?;
    Ok(ds)
}

/// |mean₁ − mean₀| / pooled standard deviation over the train split.
fn separation(rows: &[Vec<f64>], labels: &[bool], train: &[usize], c: usize) -> f64 {
    let stats = |want: bool| {
        let v: Vec<f64> = train.iter().filter(|&&i| labels[i] == want).map(|&i| rows[i][c]).collect();
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (m, var)
    };
    let (m1, v1) = stats(true);
    let (m0, v0) = stats(false);
    let sd = (0.5 * (v1 + v0)).sqrt();
    if sd > 0.0 {
        (m1 - m0).abs() / sd
    } else {
        0.0
    }
}

/// Min-max scales every feature so the train split spans `[lo, hi]`; test
/// values use the same map and may fall slightly outside.
pub fn normalize(dataset: &Dataset, lo: f64, hi: f64) -> Result<Dataset> {
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("target range [{lo}, {hi}] is empty")));
    }
    let mut scaling = Vec::with_capacity(dataset.dim());
    for (c, name) in dataset.feature_names.iter().enumerate() {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in &dataset.train {
            let v = dataset.features[i][c];
            min = min.min(v);
            max = max.max(v);
        }
        if !(max > min) {
            return Err(Error::DegenerateFeature(name.clone()));
        }
        scaling.push(FeatureScaling {
            name: name.clone(),
            min,
            max,
            lo,
            hi,
        });
    }
    let features = dataset
        .features
        .iter()
        .map(|row| row.iter().zip(&scaling).map(|(&v, s)| s.apply(v)).collect())
        .collect();
    let mut out = dataset.clone();
    out.features = features;
    let outside = dataset
        .test
        .iter()
        .flat_map(|&i| out.features[i].iter())
        .filter(|&&v| v < lo || v > hi)
        .count();
    if outside > 0 {
        out.provenance.notes.push(format!("{outside} test values outside [{lo}, {hi}]"));
    }
    out.provenance.scaling = scaling;
    Ok(out)
}

/// Covariance of each class in [`synthetic_gaussian_clusters`].
#[derive(Clone, Debug, PartialEq)]
pub enum CovarianceSpec {
    Isotropic(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl CovarianceSpec {
    fn matrix(&self, d: usize) -> Result<Vec<Vec<f64>>> {
        let m = match self {
            CovarianceSpec::Isotropic(s) => (0..d)
                .map(|i| (0..d).map(|j| if i == j { *s } else { 0.0 }).collect())
                .collect(),
            CovarianceSpec::Diagonal(v) => {
                if v.len() != d {
                    return Err(Error::Shape { expected: d, got: v.len() });
                }
                (0..d)
                    .map(|i| (0..d).map(|j| if i == j { v[i] } else { 0.0 }).collect())
                    .collect()
            }
            CovarianceSpec::Full(m) => {
                if m.len() != d || m.iter().any(|r| r.len() != d) {
                    return Err(Error::Shape { expected: d, got: m.len() });
                }
                m.clone()
            }
        };
        Ok(m)
    }
}

/// Lower-triangular L with L·Lᵀ = a.
pub fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * (a[i][j].abs() + a[j][i].abs()).max(1.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Two Gaussian classes with shared covariance, means at ±separation/2
/// along `direction` (the first axis if `None`).
#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub n_per_class: usize,
    pub mean_separation: f64,
    pub covariance: CovarianceSpec,
    pub direction: Option<Vec<f64>>,
    pub seed: u64,
}

/// A synthetic dataset together with the distribution it was drawn from.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub class_covariance: Vec<Vec<f64>>,
    pub class_means: [Vec<f64>; 2],
}

impl SyntheticData {
    /// Covariance of the equal-weight two-class mixture:
    /// Σ + ¼·δδᵀ where δ is the difference of the class means.
    pub fn population_covariance(&self) -> Vec<Vec<f64>> {
        let d = self.class_covariance.len();
        let delta: Vec<f64> = (0..d).map(|i| self.class_means[0][i] - self.class_means[1][i]).collect();
        (0..d)
            .map(|i| (0..d).map(|j| self.class_covariance[i][j] + 0.25 * delta[i] * delta[j]).collect())
            .collect()
    }
}

pub fn synthetic_gaussian_clusters(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let d = spec.dim;
    if d < 2 {
        return Err(Error::InvalidParameter(format!("dimension {d} < 2")));
    }
    if spec.n_per_class < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples per class".into()));
    }
    let cov = spec.covariance.matrix(d)?;
    let l = cholesky(&cov)?;
    let dir = match &spec.direction {
        Some(v) => {
            if v.len() != d {
                return Err(Error::Shape { expected: d, got: v.len() });
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n == 0.0 {
                return Err(Error::ZeroVector);
            }
            v.iter().map(|x| x / n).collect()
        }
        None => (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect::<Vec<_>>(),
    };
    let half = 0.5 * spec.mean_separation;
    let means = [
        dir.iter().map(|x| half * x).collect::<Vec<_>>(),
        dir.iter().map(|x| -half * x).collect::<Vec<_>>(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(2 * spec.n_per_class);
    let mut labels = Vec::with_capacity(2 * spec.n_per_class);
    for k in 0..2 * spec.n_per_class {
        let class = k % 2;
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x = (0..d)
            .map(|i| means[class][i] + (0..=i).map(|j| l[i][j] * z[j]).sum::<f64>())
            .collect();
        features.push(x);
        labels.push(class == 0);
    }
    let (train, test) = stratified_split(&labels, spec.seed ^ 0x5eed);
    let feature_names: Vec<String> = (0..d).map(|i| format!("f{}", i + 1)).collect();
    let dataset = Dataset {
        provenance: Provenance {
            source: "synthetic-gaussian".into(),
            rows_read: features.len(),
            rows_kept: features.len(),
            features: feature_names.clone(),
            seed: spec.seed,
            ..Default::default()
        },
        features,
        labels,
        feature_names,
        train,
        test,
    };
    Ok(SyntheticData {
        dataset,
        class_covariance: cov,
        class_means: means,
    })
}

/// Loadings of the shared two-state factor and of the class factor on the
/// four features of [`synthetic_mouse_like`].
const MOUSE_LIKE_SHARED: [f64; 4] = [0.6, 0.6, 0.6, 0.6];
const MOUSE_LIKE_CLASS: [f64; 4] = [0.6, -0.6, 0.36, -0.36];
const MOUSE_LIKE_SHARED_NOISE: f64 = 0.1;
const MOUSE_LIKE_CLASS_NOISE: f64 = 0.5;
const MOUSE_LIKE_FEATURE_NOISE: f64 = 0.1;

/// A stand-in for the mouse protein task when the real table is not at hand:
/// 300 samples of four positive, correlated "expression levels", half of
/// them stimulated, split 150/150.
///
/// Each sample mixes a shared factor f = ±1 (a hidden two-state condition,
/// independent of the label, plus noise of sd 0.1) that loads equally on all
/// four features, and a class factor c = ±1 + Normal(0, 0.5²) with a
/// contrasting loading, plus per-feature noise of sd 0.1; x = 1 + 0.25·(…).
/// The shared factor dominates the first principal component and the label
/// sits on the second, so a well-trained two-column PCA separates the classes
/// while a projection that misses the second component does not.
pub fn synthetic_mouse_like(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 300;
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let y = k % 2 == 0;
        let state = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let noise: f64 = StandardNormal.sample(&mut rng);
        let f = state + MOUSE_LIKE_SHARED_NOISE * noise;
        let noise: f64 = StandardNormal.sample(&mut rng);
        let c = if y { 1.0 } else { -1.0 } + MOUSE_LIKE_CLASS_NOISE * noise;
        let x: Vec<f64> = (0..4)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut rng);
                1.0 + 0.25 * (f * MOUSE_LIKE_SHARED[i] + c * MOUSE_LIKE_CLASS[i] + MOUSE_LIKE_FEATURE_NOISE * e)
            })
            .collect();
        features.push(x);
        labels.push(y);
    }
    let (train, test) = stratified_split(&labels, seed.wrapping_add(100));
    let feature_names: Vec<String> = (1..=4).map(|i| format!("protein{i}")).collect();
    Dataset {
        provenance: Provenance {
            source: "synthetic-mouse-like".into(),
            rows_read: n,
            rows_kept: n,
            features: feature_names.clone(),
            seed,
            scaling: Vec::new(),
            notes: vec!["synthetic stand-in for the mouse protein table".into()],
        },
        features,
        labels,
        feature_names,
        train,
        test,
    }
}
