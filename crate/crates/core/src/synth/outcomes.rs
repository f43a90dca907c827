use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Per-row ground truth attached to a generated dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub tau: Vec<f64>,
    pub propensity: Vec<f64>,
}

impl GroundTruth {
    pub fn new(mu0: Vec<f64>, mu1: Vec<f64>, propensity: Vec<f64>) -> Result<Self> {
        if mu0.len() != mu1.len() || mu0.len() != propensity.len() {
            return Err(Error::LengthMismatch(mu0.len(), mu1.len().max(propensity.len())));
        }
        let tau = mu1.iter().zip(&mu0).map(|(b, a)| b - a).collect();
        Ok(Self { mu0, mu1, tau, propensity })
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> GroundTruth {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect();
        GroundTruth {
            mu0: pick(&self.mu0),
            mu1: pick(&self.mu1),
            tau: pick(&self.tau),
            propensity: pick(&self.propensity),
        }
    }
}

fn check(mu0: &[f64], mu1: &[f64], treatments: &[bool], propensity: &[f64]) -> Result<()> {
    let n = mu0.len();
    for len in [mu1.len(), treatments.len(), propensity.len()] {
        if len != n {
            return Err(Error::LengthMismatch(len, n));
        }
    }
    Ok(())
}

/// Factual outcomes `y = mu_t(x) + eps` with Gaussian noise.
pub fn sample_outcomes(
    mu0: &[f64],
    mu1: &[f64],
    treatments: &[bool],
    propensity: &[f64],
    noise_sd: f64,
    seed: u64,
) -> Result<(Vec<f64>, GroundTruth)> {
    check(mu0, mu1, treatments, propensity)?;
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise_sd must be >= 0, got {noise_sd}")));
    }
    let mut rng = stream_rng(seed, 0x0C7);
    let y = if noise_sd == 0.0 {
        treatments
            .iter()
            .enumerate()
            .map(|(i, &t)| if t { mu1[i] } else { mu0[i] })
            .collect()
    } else {
        let noise = Normal::new(0.0, noise_sd).expect("finite sd");
        treatments
            .iter()
            .enumerate()
            .map(|(i, &t)| (if t { mu1[i] } else { mu0[i] }) + noise.sample(&mut rng))
            .collect()
    };
    Ok((y, GroundTruth::new(mu0.to_vec(), mu1.to_vec(), propensity.to_vec())?))
}

/// Binary outcomes drawn with rate `clip(mu_t(x), 0, 1)`. The ground truth
/// carries the clipped rates.
pub fn sample_binary_outcomes(
    mu0: &[f64],
    mu1: &[f64],
    treatments: &[bool],
    propensity: &[f64],
    seed: u64,
) -> Result<(Vec<bool>, GroundTruth)> {
    check(mu0, mu1, treatments, propensity)?;
    let clip = |v: &[f64]| v.iter().map(|x| x.clamp(0.0, 1.0)).collect::<Vec<_>>();
    let (r0, r1) = (clip(mu0), clip(mu1));
    let mut rng = stream_rng(seed, 0xB17);
    let y = treatments
        .iter()
        .enumerate()
        .map(|(i, &t)| rng.random::<f64>() < if t { r1[i] } else { r0[i] })
        .collect();
    Ok((y, GroundTruth::new(r0, r1, propensity.to_vec())?))
}
