use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Label};
use crate::error::{Error, Result};
use crate::rng::{label, SeedStream};

/// Two unit-covariance Gaussian clusters, signal shifted along the first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub dimension: usize,
    /// Distance between the class means, in standard deviations.
    pub overlap: f64,
    /// Prior probability of the signal (minority) class.
    pub imbalance: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be positive".into()));
        }
        if self.dimension == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if !(self.overlap >= 0.0) || !self.overlap.is_finite() {
            return Err(Error::InvalidConfig(format!("overlap must be >= 0, got {}", self.overlap)));
        }
        if !(self.imbalance > 0.0 && self.imbalance <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "imbalance must lie in (0, 1], got {}",
                self.imbalance
            )));
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n_samples;
    let d = spec.dimension;
    let mut rng = SeedStream::new(spec.seed).child(label::SYNTH, 0).rng();
    let mut columns = vec![0.0; n * d];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let l = if rng.random::<f64>() < spec.imbalance {
            Label::Signal
        } else {
            Label::Background
        };
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            let shift = if j == 0 && l.is_signal() { spec.overlap } else { 0.0 };
            columns[j * n + i] = z + shift;
        }
        labels.push(l);
    }
    let names = (0..d).map(|j| format!("f{j}")).collect();
    Dataset::from_columns(columns, n, names, labels, None, None)
}
