use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    assign_treatment, calibrate, eval_surface, gen_covariates, sample_binary_outcomes, sample_linear,
    sample_multi_peaked, sample_outcomes, AssignmentMode, AssignmentSpec, BetaSupport, GroundTruth,
    Surface, SurfaceKind, TARGET_EFFECT,
};
use crate::data::{encode, Dataset, EncodedMatrix, Sample};
use crate::error::{Error, Result};
use crate::matrix::pearson;
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum AssignmentConfig {
    Rct { ratio: f64 },
    /// The biased column is chosen at generation time.
    Confounded { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeMode {
    /// `y = mu_t(x) + N(0, noise_sd^2)`, stored as the continuous outcome.
    Continuous,
    /// Visit drawn with rate `clip(baseline_rate + mu_t(x), 0, 1)`.
    Binary,
}

/// Everything needed to regenerate a corpus bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n: usize,
    pub surface: SurfaceKind,
    pub assignment: AssignmentConfig,
    pub noise_sd: f64,
    pub seed: u64,
    pub n_projections: usize,
    pub buckets_per_projection: usize,
    pub n_anchors: usize,
    pub sigma: f64,
    pub calibrate: bool,
    pub target_effect: f64,
    /// Overrides the default coefficient distribution of the linear surfaces.
    pub beta_support: Option<BetaSupport>,
    /// Constant entry of the Case B offset matrix.
    pub offset: f64,
    pub outcome: OutcomeMode,
    pub baseline_rate: f64,
    /// Probability of effective exposure for a treated user.
    pub exposure_rate: f64,
    /// Probability of conversion given a visit (binary mode).
    pub conversion_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n: 20_000,
            surface: SurfaceKind::MultiPeaked,
            assignment: AssignmentConfig::Confounded { delta: 0.01 },
            noise_sd: 1.0,
            seed: 0,
            n_projections: 5,
            buckets_per_projection: 6,
            n_anchors: 5,
            sigma: 1.0,
            calibrate: true,
            target_effect: TARGET_EFFECT,
            beta_support: None,
            offset: 0.5,
            outcome: OutcomeMode::Continuous,
            baseline_rate: 0.0,
            exposure_rate: 1.0,
            conversion_rate: 0.06,
        }
    }
}

impl GeneratorConfig {
    /// Binary-outcome RCT corpus for uplift-model evaluation: an 85/15
    /// assignment, a 5% baseline visit rate and a small average uplift spread
    /// over many narrow bumps.
    pub fn binary_uplift() -> Self {
        Self {
            n: 100_000,
            assignment: AssignmentConfig::Rct { ratio: 0.85 },
            outcome: OutcomeMode::Binary,
            n_anchors: 50,
            target_effect: 0.03,
            baseline_rate: 0.05,
            ..Self::default()
        }
    }

    /// Same configuration on the independent seed stream of realization `r`.
    pub fn for_realization(&self, r: u64) -> Self {
        Self {
            seed: derive_seed(self.seed, r),
            ..self.clone()
        }
    }
}

/// A generated corpus with its encoding and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub config: GeneratorConfig,
    pub dataset: Dataset,
    pub encoded: EncodedMatrix,
    pub truth: GroundTruth,
    /// Calibrated surface.
    pub surface: Surface,
    pub assignment: AssignmentSpec,
}

/// Column with the largest absolute correlation with `target` (first on ties).
pub fn most_important_column(enc: &EncodedMatrix, target: &[f64]) -> usize {
    let mut best = (0, -1.0);
    for j in 0..enc.dims() {
        let c = pearson(&enc.matrix.column(j), target).abs();
        if c > best.1 {
            best = (j, c);
        }
    }
    best.0
}

/// Covariates, encoding, surfaces, assignment, calibration and outcomes,
/// each on its own seed stream derived from `config.seed`.
pub fn generate(config: &GeneratorConfig) -> Result<Generated> {
    if config.n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let seed = config.seed;
    let covariates = gen_covariates(config.n, derive_seed(seed, 1));
    let encoded = encode(
        &covariates,
        config.n_projections,
        config.buckets_per_projection,
        derive_seed(seed, 2),
    )?;

    let mut rng = stream_rng(seed, 3);
    let mut surface = match config.surface {
        SurfaceKind::MultiPeaked => sample_multi_peaked(&encoded, config.n_anchors, config.sigma, &mut rng)?,
        kind => {
            let support = config.beta_support.clone().unwrap_or_else(|| match kind {
                SurfaceKind::CaseA => BetaSupport::case_a(),
                _ => BetaSupport::case_b(),
            });
            sample_linear(kind, encoded.dims(), &support, config.offset, &mut rng)?
        }
    };
    if let Surface::CaseA { effect, .. } = &mut surface {
        *effect = config.target_effect;
    }

    let mode = match config.assignment {
        AssignmentConfig::Rct { ratio } => AssignmentMode::Rct { ratio },
        AssignmentConfig::Confounded { delta } => {
            let (mu0, mu1) = eval_surface(&surface, &encoded)?;
            let mean_surface: Vec<f64> = mu0.iter().zip(&mu1).map(|(a, b)| 0.5 * (a + b)).collect();
            AssignmentMode::Confounded {
                delta,
                alpha_index: most_important_column(&encoded, &mean_surface),
            }
        }
    };
    let assignment = AssignmentSpec {
        mode,
        seed: derive_seed(seed, 4),
    };
    let (treatments, propensity) = assign_treatment(&encoded, &assignment)?;

    if config.calibrate {
        surface = calibrate(&surface, &encoded, &treatments, config.target_effect)?;
    }
    let (mut mu0, mut mu1) = eval_surface(&surface, &encoded)?;

    let mut rng = stream_rng(seed, 6);
    let (samples, truth) = match config.outcome {
        OutcomeMode::Continuous => {
            let (y, truth) = sample_outcomes(&mu0, &mu1, &treatments, &propensity, config.noise_sd, derive_seed(seed, 5))?;
            let samples = covariates
                .into_samples()
                .into_iter()
                .zip(treatments.iter().zip(y))
                .map(|(s, (&t, y))| Sample {
                    treatment: t,
                    exposure: t && rng.random::<f64>() < config.exposure_rate,
                    outcome: Some(y),
                    ..s
                })
                .collect::<Vec<_>>();
            (samples, truth)
        }
        OutcomeMode::Binary => {
            for m in mu0.iter_mut().chain(mu1.iter_mut()) {
                *m += config.baseline_rate;
            }
            let (visits, truth) = sample_binary_outcomes(&mu0, &mu1, &treatments, &propensity, derive_seed(seed, 5))?;
            let samples = covariates
                .into_samples()
                .into_iter()
                .zip(treatments.iter().zip(visits))
                .map(|(s, (&t, v))| Sample {
                    treatment: t,
                    exposure: t && rng.random::<f64>() < config.exposure_rate,
                    visit: v,
                    conversion: v && rng.random::<f64>() < config.conversion_rate,
                    ..s
                })
                .collect::<Vec<_>>();
            (samples, truth)
        }
    };

    Ok(Generated {
        config: config.clone(),
        dataset: Dataset::new(samples).with_source_tag(format!("synthetic-{}", config.surface.name())),
        encoded,
        truth,
        surface,
        assignment,
    })
}

/// Continuous-outcome corpus for ITE benchmarking.
pub fn generate_ite_dataset(config: &GeneratorConfig) -> Result<Generated> {
    if config.outcome != OutcomeMode::Continuous {
        return Err(Error::InvalidArgument("ITE corpora use continuous outcomes".into()));
    }
    generate(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_constraints;

    #[test]
    fn multi_peaked_defaults_calibrate_to_four() {
        let g = generate_ite_dataset(&GeneratorConfig { n: 3000, seed: 5, ..Default::default() }).unwrap();
        let ate = g.truth.tau.iter().sum::<f64>() / 3000.0;
        assert!((ate - 4.0).abs() < 1e-9);
        let Surface::MultiPeaked { anchors, sigmas, .. } = &g.surface else { panic!() };
        assert_eq!(anchors.len(), 5);
        assert!(sigmas.iter().all(|&s| s == 1.0));
        assert!(g.truth.propensity.iter().all(|&p| (0.01..=0.99).contains(&p)));
        assert!(validate_constraints(&g.dataset).is_clean());
    }

    #[test]
    fn rct_propensities_equal_ratio() {
        let cfg = GeneratorConfig {
            n: 500,
            surface: SurfaceKind::CaseA,
            assignment: AssignmentConfig::Rct { ratio: 0.5 },
            ..Default::default()
        };
        let g = generate(&cfg).unwrap();
        assert!(g.truth.propensity.iter().all(|&p| p == 0.5));
        // exact up to the rounding of (x.beta + 4) - x.beta
        assert!(g.truth.tau.iter().all(|&t| (t - 4.0).abs() < 1e-12));
    }

    #[test]
    fn same_seed_bit_identical() {
        for surface in [SurfaceKind::CaseA, SurfaceKind::CaseB, SurfaceKind::MultiPeaked] {
            let cfg = GeneratorConfig { n: 400, surface, seed: 17, ..Default::default() };
            assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        }
    }

    #[test]
    fn case_b_att_is_target() {
        let cfg = GeneratorConfig { n: 4000, surface: SurfaceKind::CaseB, seed: 2, ..Default::default() };
        let g = generate(&cfg).unwrap();
        let (mut s, mut n) = (0.0, 0.0);
        for (tau, smp) in g.truth.tau.iter().zip(g.dataset.samples()) {
            if smp.treatment {
                s += tau;
                n += 1.0;
            }
        }
        assert!((s / n - 4.0).abs() < 1e-9);
    }

    #[test]
    fn binary_mode_respects_constraints() {
        let cfg = GeneratorConfig {
            n: 2000,
            outcome: OutcomeMode::Binary,
            assignment: AssignmentConfig::Rct { ratio: 0.85 },
            calibrate: false,
            baseline_rate: 0.3,
            exposure_rate: 0.5,
            conversion_rate: 0.5,
            ..Default::default()
        };
        let g = generate(&cfg).unwrap();
        assert!(validate_constraints(&g.dataset).is_clean());
        assert!(g.dataset.visit_rate() > 0.1);
        assert!(g.dataset.conversion_rate() > 0.0);
    }
}
