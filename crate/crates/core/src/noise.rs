//! Seeded white Gaussian noise and mean-square estimation.
//!
//! Noise is produced as white samples at the Nyquist rate of the channel
//! bandwidth, so "band-limited to B" is carried by the sampling rate and no
//! explicit filter is applied.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Result};
use crate::rng::stream_rng;

/// Parameters of one generator run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Per-sample variance in volts².
    pub variance: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(variance: f64, n_samples: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            variance,
            n_samples,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance.is_finite() && self.variance > 0.0) {
            return Err(config(format!(
                "noise variance must be positive and finite, got {}",
                self.variance
            )));
        }
        if self.n_samples == 0 {
            return Err(config("noise sample count must be at least 1"));
        }
        Ok(())
    }
}

/// Draws `n_samples` i.i.d. zero-mean Gaussian values with the requested variance.
pub fn gen_noise(spec: &NoiseSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let sigma = spec.variance.sqrt();
    let mut rng = stream_rng(spec.seed);
    Ok((0..spec.n_samples)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect())
}

/// Sample mean square of a sequence, with the sample count it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsEstimate {
    pub mean_square: f64,
    pub n: usize,
}

impl MsEstimate {
    /// Pools two estimates, weighting each by its sample count.
    pub fn merge(self, other: MsEstimate) -> MsEstimate {
        let n = self.n + other.n;
        if n == 0 {
            return MsEstimate {
                mean_square: 0.0,
                n,
            };
        }
        let mean_square =
            (self.mean_square * self.n as f64 + other.mean_square * other.n as f64) / n as f64;
        MsEstimate { mean_square, n }
    }
}

pub fn mean_square(samples: &[f64]) -> Result<MsEstimate> {
    if samples.is_empty() {
        return Err(usage("mean square of an empty sample sequence"));
    }
    let sum: f64 = samples.iter().map(|x| x * x).sum();
    Ok(MsEstimate {
        mean_square: sum / samples.len() as f64,
        n: samples.len(),
    })
}
