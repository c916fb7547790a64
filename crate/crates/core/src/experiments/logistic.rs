//! Two-feature logistic regression by full-batch gradient ascent.

use crate::error::{Error, Result};

pub const LEARNING_RATE: f64 = 0.1;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 100_000;

/// Decision boundary w·p + b = 0; the positive side predicts `true`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Boundary {
    pub w: [f64; 2],
    pub b: f64,
}

impl Boundary {
    pub fn margin(&self, p: [f64; 2]) -> f64 {
        self.w[0] * p[0] + self.w[1] * p[1] + self.b
    }
}

/// Outcome of [`logistic_fit`] beyond the boundary itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitReport {
    pub boundary: Boundary,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub log_likelihood: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Σ_k [y_k·t_k − log(1 + e^{t_k})] with t_k = w·p_k + b; `params` = (w₁, w₂, b).
pub fn log_likelihood(params: [f64; 3], points: &[[f64; 2]], labels: &[bool]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &y)| {
            let t = params[0] * p[0] + params[1] * p[1] + params[2];
            (if y { t } else { 0.0 }) - softplus(t)
        })
        .sum()
}

/// Analytic gradient of [`log_likelihood`]: Σ_k (y_k − σ(t_k))·(p_k, 1).
pub fn log_likelihood_gradient(params: [f64; 3], points: &[[f64; 2]], labels: &[bool]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (p, &y) in points.iter().zip(labels) {
        let t = params[0] * p[0] + params[1] * p[1] + params[2];
        let r = (if y { 1.0 } else { 0.0 }) - sigmoid(t);
        g[0] += r * p[0];
        g[1] += r * p[1];
        g[2] += r;
    }
    g
}

/// Maximizes the logistic log-likelihood on standardized inputs with step
/// 0.1 on the mean gradient, stopping when its norm falls below 1e-6 or
/// after 10⁵ iterations. The boundary is returned in the original units.
pub fn logistic_fit(points: &[[f64; 2]], labels: &[bool]) -> Result<FitReport> {
    if points.len() != labels.len() {
        return Err(Error::Shape {
            expected: points.len(),
            got: labels.len(),
        });
    }
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!("{} points", points.len())));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::EmptyClass("logistic fit needs both labels".into()));
    }
    let n = points.len() as f64;
    let mut mean = [0.0; 2];
    for p in points {
        mean[0] += p[0] / n;
        mean[1] += p[1] / n;
    }
    let mut sd = [0.0; 2];
    for p in points {
        sd[0] += (p[0] - mean[0]).powi(2) / n;
        sd[1] += (p[1] - mean[1]).powi(2) / n;
    }
    let sd = sd.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
    let z: Vec<[f64; 2]> = points
        .iter()
        .map(|p| [(p[0] - mean[0]) / sd[0], (p[1] - mean[1]) / sd[1]])
        .collect();

    let mut theta = [0.0; 3];
    let mut iterations = 0;
    let mut gnorm;
    loop {
        let g = log_likelihood_gradient(theta, &z, labels).map(|v| v / n);
        gnorm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if gnorm < GRADIENT_TOLERANCE || iterations >= MAX_ITERATIONS {
            break;
        }
        for k in 0..3 {
            theta[k] += LEARNING_RATE * g[k];
        }
        iterations += 1;
    }
    let w = [theta[0] / sd[0], theta[1] / sd[1]];
    let b = theta[2] - w[0] * mean[0] - w[1] * mean[1];
    Ok(FitReport {
        boundary: Boundary { w, b },
        iterations,
        gradient_norm: gnorm,
        log_likelihood: log_likelihood(theta, &z, labels),
    })
}

/// Fraction of points strictly on their label's side of the boundary.
/// Points exactly on the line count as wrong.
pub fn score(boundary: &Boundary, points: &[[f64; 2]], labels: &[bool]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let correct = points
        .iter()
        .zip(labels)
        .filter(|(p, &y)| {
            let m = boundary.margin(**p);
            if y {
                m > 0.0
            } else {
                m < 0.0
            }
        })
        .count();
    correct as f64 / points.len() as f64
}
