//! Gaussian tuning-curve population coding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tuning-curve variance.
pub const DEFAULT_VARIANCE: f64 = 0.18;

/// `n` neurons with equal-variance Gaussian tuning curves whose preferred
/// stimuli are evenly spaced and decreasing from zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationEncoder {
    n: usize,
    spacing: f64,
    variance: f64,
    means: Vec<f64>,
}

impl PopulationEncoder {
    /// Means at `0, −spacing, …, −(n−1)·spacing`.
    pub fn new(n: usize, spacing: f64, variance: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("population size {n} < 2")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParameter(format!("spacing {spacing} must be > 0")));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidParameter(format!("variance {variance} must be > 0")));
        }
        let means = (0..n).map(|k| -(k as f64) * spacing).collect();
        Ok(Self {
            n,
            spacing,
            variance,
            means,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Reception field `(lo, hi)` spanned by the means.
    pub fn reception_field(&self) -> (f64, f64) {
        (self.means[self.n - 1], self.means[0])
    }

    /// Responses `exp(−(x − μ_k)²/(2σ²))`, each in (0, 1].
    pub fn encode(&self, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n);
        self.encode_into(x, &mut out);
        out
    }

    pub fn encode_into(&self, x: f64, out: &mut Vec<f64>) {
        let inv = 1.0 / (2.0 * self.variance);
        out.extend(self.means.iter().map(|&mu| {
            let d = x - mu;
            // far tails underflow to 0; keep the response strictly positive
            (-(d * d) * inv).exp().max(f64::MIN_POSITIVE)
        }));
    }
}

/// Shorthand for [`PopulationEncoder::new`] with the default variance.
pub fn make_encoder(n: usize, spacing: f64) -> Result<PopulationEncoder> {
    PopulationEncoder::new(n, spacing, DEFAULT_VARIANCE)
}

/// Feature-major concatenation: entry `i·n + k` is neuron `k` of feature `i`.
pub fn encode_sample(encoders: &[PopulationEncoder], features: &[f64]) -> Result<Vec<f64>> {
    if encoders.len() != features.len() {
        return Err(Error::Shape {
            expected: encoders.len(),
            got: features.len(),
        });
    }
    let mut out = Vec::with_capacity(encoders.iter().map(|e| e.n()).sum());
    for (enc, &x) in encoders.iter().zip(features) {
        enc.encode_into(x, &mut out);
    }
    Ok(out)
}
