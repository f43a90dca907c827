use std::collections::HashSet;

use rand::seq::{index, SliceRandom};

use super::{Dataset, Sources};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Sub-samples every test to the same treated fraction and concatenates them.
///
/// Within each test only the over-represented arm is down-sampled, uniformly
/// without replacement. The concatenation is shuffled with `seed`; per-row
/// origins are kept in [`Dataset::sources`].
pub fn rebalance(tests: &[Dataset], target_ratio: f64, seed: u64) -> Result<Dataset> {
    if !(target_ratio > 0.0 && target_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target_ratio must lie in (0, 1), got {target_ratio}"
        )));
    }
    let tags: Vec<String> = tests
        .iter()
        .enumerate()
        .map(|(k, d)| d.source_tag().map_or_else(|| format!("test{k}"), str::to_string))
        .collect();
    if tags.iter().collect::<HashSet<_>>().len() != tags.len() {
        return Err(Error::InvalidArgument("source tags must be distinct".into()));
    }

    let mut samples = Vec::new();
    let mut row_tag = Vec::new();
    for (k, (test, tag)) in tests.iter().zip(&tags).enumerate() {
        let (treated, control): (Vec<usize>, Vec<usize>) =
            (0..test.len()).partition(|&i| test.samples()[i].treatment);
        if treated.is_empty() || control.is_empty() {
            return Err(Error::Unreachable(tag.clone()));
        }
        let (n_t, n_c) = (treated.len() as f64, control.len() as f64);
        let (keep_t, keep_c) = if n_t / (n_t + n_c) > target_ratio {
            let k_t = (n_c * target_ratio / (1.0 - target_ratio) + 1e-9).floor() as usize;
            (k_t.min(treated.len()), control.len())
        } else {
            let k_c = (n_t * (1.0 - target_ratio) / target_ratio + 1e-9).floor() as usize;
            (treated.len(), k_c.min(control.len()))
        };
        let mut rng = stream_rng(seed, k as u64);
        let mut kept: Vec<usize> = index::sample(&mut rng, treated.len(), keep_t)
            .into_iter()
            .map(|i| treated[i])
            .chain(index::sample(&mut rng, control.len(), keep_c).into_iter().map(|i| control[i]))
            .collect();
        kept.sort_unstable();
        for i in kept {
            samples.push(test.samples()[i].clone());
            row_tag.push(k as u32);
        }
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut stream_rng(seed, u64::MAX));
    let shuffled = order.iter().map(|&i| samples[i].clone()).collect();
    let row = order.iter().map(|&i| row_tag[i]).collect();
    Ok(Dataset::new(shuffled)
        .with_source_tag(tags.join("+"))
        .with_sources(Sources { tags, row }))
}
