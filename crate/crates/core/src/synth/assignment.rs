use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::matrix::{mean, sigmoid, std_dev};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum AssignmentMode {
    /// Independent Bernoulli draws with a constant rate.
    Rct { ratio: f64 },
    /// Propensity `(1 - 2 delta) * sigmoid(z) + delta` where `z` is the
    /// standardized encoded column `alpha_index`.
    Confounded { delta: f64, alpha_index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSpec {
    pub mode: AssignmentMode,
    pub seed: u64,
}

/// Biased propensity for a linear score `z`; always within `[delta, 1 - delta]`.
pub fn confounded_propensity(z: f64, delta: f64) -> f64 {
    (1.0 - 2.0 * delta) * sigmoid(z) + delta
}

impl AssignmentSpec {
    pub fn validate(&self, dims: usize) -> Result<()> {
        match self.mode {
            AssignmentMode::Rct { ratio } if !(ratio > 0.0 && ratio < 1.0) => Err(Error::InvalidArgument(
                format!("rct ratio must lie in (0, 1), got {ratio}"),
            )),
            AssignmentMode::Confounded { delta, .. } if !(delta > 0.0 && delta < 0.5) => Err(
                Error::InvalidArgument(format!("delta must lie in (0, 0.5), got {delta}")),
            ),
            AssignmentMode::Confounded { alpha_index, .. } if alpha_index >= dims => Err(
                Error::InvalidArgument(format!("alpha_index {alpha_index} out of range for {dims} columns")),
            ),
            _ => Ok(()),
        }
    }

    /// Exact propensity of every row.
    pub fn propensities(&self, enc: &EncodedMatrix) -> Result<Vec<f64>> {
        self.validate(enc.dims())?;
        Ok(match self.mode {
            AssignmentMode::Rct { ratio } => vec![ratio; enc.rows()],
            AssignmentMode::Confounded { delta, alpha_index } => {
                let col = enc.matrix.column(alpha_index);
                let (m, sd) = (mean(&col), std_dev(&col));
                let scale = if sd > 0.0 { 1.0 / sd } else { 0.0 };
                col.iter()
                    .map(|x| confounded_propensity((x - m) * scale, delta))
                    .collect()
            }
        })
    }
}

/// Draws treatments from the propensities of `spec`; returns both.
pub fn assign_treatment(enc: &EncodedMatrix, spec: &AssignmentSpec) -> Result<(Vec<bool>, Vec<f64>)> {
    let p = spec.propensities(enc)?;
    let mut rng = stream_rng(spec.seed, 0xA551);
    let t = p.iter().map(|&pi| rng.random::<f64>() < pi).collect();
    Ok((t, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::encode;
    use crate::synth::gen_covariates;

    #[test]
    fn symmetric_at_zero_and_bounded_in_the_limit() {
        for delta in [0.01, 0.1, 0.3] {
            assert_eq!(confounded_propensity(0.0, delta), 0.5);
            assert!((confounded_propensity(1e6, delta) - (1.0 - delta)).abs() < 1e-15);
            assert!((confounded_propensity(-1e6, delta) - delta).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_evaluated_point() {
        let p = confounded_propensity(3f64.ln(), 0.01);
        assert!((p - 0.745).abs() < 1e-12);
    }

    #[test]
    fn rct_propensities_constant() {
        let enc = encode(&gen_covariates(500, 1), 2, 4, 1).unwrap();
        let spec = AssignmentSpec { mode: AssignmentMode::Rct { ratio: 0.85 }, seed: 2 };
        let (t, p) = assign_treatment(&enc, &spec).unwrap();
        assert!(p.iter().all(|&x| x == 0.85));
        let ratio = t.iter().filter(|&&b| b).count() as f64 / 500.0;
        assert!((ratio - 0.85).abs() < 0.06);
    }

    #[test]
    fn rejects_bad_specs() {
        let enc = encode(&gen_covariates(10, 1), 0, 2, 1).unwrap();
        let bad = [
            AssignmentMode::Rct { ratio: 1.0 },
            AssignmentMode::Confounded { delta: 0.5, alpha_index: 0 },
            AssignmentMode::Confounded { delta: 0.1, alpha_index: 4 },
        ];
        for mode in bad {
            assert!(assign_treatment(&enc, &AssignmentSpec { mode, seed: 0 }).is_err());
        }
    }
}
