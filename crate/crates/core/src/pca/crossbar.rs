use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::device::Synapse;
use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 0.005;

/// Rows × 2 synapses; column 0 learns the first component, column 1 the second.
#[derive(Clone, Debug)]
pub struct Crossbar<S> {
    synapses: Vec<[S; 2]>,
    learning_rate: f64,
}

/// Column norms and their mutual angle. The angle is `None` when either
/// column is the zero vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics {
    pub norm1: f64,
    pub norm2: f64,
    pub angle_deg: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub norm1: f64,
    pub norm2: f64,
    pub angle_deg: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
}

impl TrainingTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Writes `step,norm1,norm2,angle_deg`; an undefined angle is left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,norm1,norm2,angle_deg")?;
        for r in &self.rows {
            let angle = r.angle_deg.map(|a| a.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", r.step, r.norm1, r.norm2, angle)?;
        }
        Ok(())
    }
}

/// Sanger's rule for two outputs, evaluated entirely at the given weights:
/// Δw_ij = η·y_j·(x_i − Σ_{k≤j} w_ik·y_k).
pub fn sanger_deltas(weights: &[[f64; 2]], x: &[f64], y: [f64; 2], learning_rate: f64) -> Vec<[f64; 2]> {
    weights
        .iter()
        .zip(x)
        .map(|(w, &xi)| {
            let r1 = xi - w[0] * y[0];
            let r2 = r1 - w[1] * y[1];
            [learning_rate * y[0] * r1, learning_rate * y[1] * r2]
        })
        .collect()
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

impl<S: Synapse> Crossbar<S> {
    pub fn new(synapses: Vec<[S; 2]>, learning_rate: f64) -> Result<Self> {
        if synapses.is_empty() {
            return Err(Error::InvalidParameter("crossbar needs at least one row".into()));
        }
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate {learning_rate}")));
        }
        Ok(Self {
            synapses,
            learning_rate,
        })
    }

    /// Builds a crossbar by calling `make(row, column)` for every crossing.
    pub fn from_fn(rows: usize, learning_rate: f64, mut make: impl FnMut(usize, usize) -> S) -> Result<Self> {
        let synapses = (0..rows).map(|i| [make(i, 0), make(i, 1)]).collect();
        Self::new(synapses, learning_rate)
    }

    pub fn rows(&self) -> usize {
        self.synapses.len()
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn synapse(&self, row: usize, col: usize) -> &S {
        &self.synapses[row][col]
    }

    pub fn synapses(&self) -> &[[S; 2]] {
        &self.synapses
    }

    pub fn weights(&self) -> Vec<[f64; 2]> {
        self.synapses
            .iter()
            .map(|s| [s[0].read_weight(), s[1].read_weight()])
            .collect()
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.synapses.iter().map(|s| s[col].read_weight()).collect()
    }

    /// Programs every synapse toward a target drawn uniformly from [−0.5, 0.5].
    pub fn randomize<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        for pair in &mut self.synapses {
            for s in pair.iter_mut() {
                let target = rng.random_range(-0.5..=0.5);
                s.randomize_weight(target)?;
            }
        }
        Ok(())
    }

    /// y_j = Σ_i x_i·w_ij. Reading never disturbs the synapses.
    pub fn forward(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.rows() {
            return Err(Error::Shape {
                expected: self.rows(),
                got: x.len(),
            });
        }
        let mut y = [0.0; 2];
        for (s, &xi) in self.synapses.iter().zip(x) {
            y[0] += xi * s[0].read_weight();
            y[1] += xi * s[1].read_weight();
        }
        Ok(y)
    }

    /// Applies one Sanger step through `write_delta`, returning the
    /// requested deltas. Both columns use the weights from before the step.
    pub fn sanger_update(&mut self, x: &[f64], y: [f64; 2]) -> Result<Vec<[f64; 2]>> {
        if x.len() != self.rows() {
            return Err(Error::Shape {
                expected: self.rows(),
                got: x.len(),
            });
        }
        let deltas = sanger_deltas(&self.weights(), x, y, self.learning_rate);
        for (pair, d) in self.synapses.iter_mut().zip(&deltas) {
            pair[0].write_delta(d[0])?;
            pair[1].write_delta(d[1])?;
        }
        Ok(deltas)
    }

    pub fn weight_diagnostics(&self) -> Diagnostics {
        let w1 = self.column(0);
        let w2 = self.column(1);
        let norm1 = norm(w1.iter().copied());
        let norm2 = norm(w2.iter().copied());
        let angle_deg = if norm1 > 0.0 && norm2 > 0.0 {
            let dot: f64 = w1.iter().zip(&w2).map(|(a, b)| a * b).sum();
            Some((dot / (norm1 * norm2)).clamp(-1.0, 1.0).acos().to_degrees())
        } else {
            None
        };
        Diagnostics {
            norm1,
            norm2,
            angle_deg,
        }
    }

    pub fn train(&mut self, inputs: &[Vec<f64>], steps: usize, seed: u64) -> Result<TrainingTrace> {
        self.train_with(inputs, steps, seed, |_, _| Ok(()))
    }

    /// Runs `steps` online updates, visiting the inputs in a fresh shuffled
    /// order each epoch. `observe(step, crossbar)` runs after every update
    /// with the 1-based step count.
    pub fn train_with(
        &mut self,
        inputs: &[Vec<f64>],
        steps: usize,
        seed: u64,
        mut observe: impl FnMut(usize, &Self) -> Result<()>,
    ) -> Result<TrainingTrace> {
        if inputs.is_empty() {
            return Err(Error::InsufficientData("no training inputs".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut trace = TrainingTrace::default();
        for step in 0..steps {
            let pos = step % inputs.len();
            if pos == 0 {
                order.shuffle(&mut rng);
            }
            let x = &inputs[order[pos]];
            let y = self.forward(x)?;
            self.sanger_update(x, y)?;
            let d = self.weight_diagnostics();
            trace.rows.push(TraceRow {
                step: step + 1,
                norm1: d.norm1,
                norm2: d.norm2,
                angle_deg: d.angle_deg,
            });
            observe(step + 1, self)?;
        }
        Ok(trace)
    }
}
