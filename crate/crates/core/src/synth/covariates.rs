use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Zipf};

use crate::data::{Dataset, Sample, N_CATEGORICAL, N_CONTINUOUS};
use crate::rng::stream_rng;

/// Category counts of the eight categorical features.
pub const CARDINALITIES: [u32; N_CATEGORICAL] = [60, 552, 260, 132, 1645, 3743, 1594, 136];
pub const ZIPF_EXPONENT: f64 = 1.2;
/// Pairwise correlation of the continuous features.
pub const CONTINUOUS_CORRELATION: f64 = 0.2;

/// Draws `n` feature vectors; labels and treatment are left unset.
///
/// Continuous features share one Gaussian factor, which gives every pair the
/// same correlation. Categorical codes are Zipf-distributed with code 0 the
/// most frequent.
pub fn gen_covariates(n: usize, seed: u64) -> Dataset {
    let mut rng = stream_rng(seed, 0xC0FA);
    let zipfs: Vec<Zipf<f64>> = CARDINALITIES
        .iter()
        .map(|&c| Zipf::new(f64::from(c), ZIPF_EXPONENT).expect("valid zipf parameters"))
        .collect();
    let shared = CONTINUOUS_CORRELATION.sqrt();
    let own = (1.0 - CONTINUOUS_CORRELATION).sqrt();
    let samples = (0..n)
        .map(|_| {
            let common: f64 = rng.sample(StandardNormal);
            let mut continuous = [0.0; N_CONTINUOUS];
            for c in &mut continuous {
                let z: f64 = rng.sample(StandardNormal);
                *c = shared * common + own * z;
            }
            let mut categorical = [0u32; N_CATEGORICAL];
            for (code, (z, &card)) in categorical.iter_mut().zip(zipfs.iter().zip(&CARDINALITIES)) {
                *code = (z.sample(&mut rng) as u32).clamp(1, card) - 1;
            }
            Sample::features(continuous, categorical)
        })
        .collect();
    Dataset::new(samples)
}
