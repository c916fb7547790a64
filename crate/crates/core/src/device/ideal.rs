use super::Synapse;
use crate::error::Result;

/// Exact weight storage: reads return the last written value.
#[derive(Clone, Debug, PartialEq)]
pub struct IdealSynapse {
    weight: f64,
    bounded: bool,
}

impl IdealSynapse {
    /// Weight held in [−1, 1] like a physical device.
    pub fn new(weight: f64) -> Self {
        Self {
            weight: weight.clamp(-1.0, 1.0),
            bounded: true,
        }
    }

    /// Unconstrained weight, for the software PCA reference.
    pub fn unbounded(weight: f64) -> Self {
        Self {
            weight,
            bounded: false,
        }
    }
}

impl Synapse for IdealSynapse {
    fn read_weight(&self) -> f64 {
        self.weight
    }

    fn write_delta(&mut self, requested: f64) -> Result<f64> {
        let before = self.weight;
        let mut w = before + requested;
        if self.bounded {
            w = w.clamp(-1.0, 1.0);
        }
        self.weight = w;
        Ok(w - before)
    }

    fn randomize_weight(&mut self, target: f64) -> Result<f64> {
        self.weight = if self.bounded { target.clamp(-1.0, 1.0) } else { target };
        Ok(self.weight)
    }
}
