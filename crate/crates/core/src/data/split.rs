use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, OutcomeLabel};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stratify {
    Treatment,
    /// Treatment crossed with a binary outcome label.
    TreatmentAndOutcome(OutcomeLabel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratify_on: Stratify,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, stratify_on: Stratify, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train_fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        Ok(Self {
            train_fraction,
            stratify_on,
            seed,
        })
    }
}

fn stratum_keys(d: &Dataset, on: Stratify) -> Result<Vec<u32>> {
    d.samples()
        .iter()
        .map(|s| {
            let t = u32::from(s.treatment);
            match on {
                Stratify::Treatment => Ok(t),
                Stratify::TreatmentAndOutcome(OutcomeLabel::Continuous) => Err(Error::InvalidArgument(
                    "cannot stratify on a continuous outcome".into(),
                )),
                Stratify::TreatmentAndOutcome(label) => {
                    let y = label.value(s).unwrap_or(0.0);
                    Ok(t * 2 + u32::from(y > 0.5))
                }
            }
        })
        .collect()
}

fn stratum_name(key: u32, on: Stratify) -> String {
    match on {
        Stratify::Treatment => format!("treatment={key}"),
        Stratify::TreatmentAndOutcome(_) => format!("treatment={},outcome={}", key / 2, key % 2),
    }
}

fn strata(keys: &[u32]) -> BTreeMap<u32, Vec<usize>> {
    let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &k) in keys.iter().enumerate() {
        map.entry(k).or_default().push(i);
    }
    map
}

/// Per-stratum train counts: floor of the exact share, then the rows
/// missing from `round(n * fraction)` go to the largest fractional parts.
/// Every stratum keeps at least one row on each side.
fn train_counts(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let exact: Vec<f64> = sizes.iter().map(|&s| s as f64 * fraction).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| (x + 1e-9).floor() as usize).collect();
    let target = (n as f64 * fraction).round() as usize;
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - counts[a] as f64;
        let fb = exact[b] - counts[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &s in order.iter().take(target.saturating_sub(assigned)) {
        counts[s] += 1;
    }
    for (c, &s) in counts.iter_mut().zip(sizes) {
        *c = (*c).clamp(1, s - 1);
    }
    counts
}

/// Stratified train/test partition of row indices. Both outputs are sorted.
pub fn split_keys(keys: &[u32], train_fraction: f64, seed: u64, name: impl Fn(u32) -> String) -> Result<(Vec<usize>, Vec<usize>)> {
    let groups = strata(keys);
    for (&k, rows) in &groups {
        if rows.len() < 2 {
            return Err(Error::UndersizedStratum {
                stratum: name(k),
                size: rows.len(),
                required: 2,
            });
        }
    }
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let counts = train_counts(&sizes, train_fraction);
    let mut rng = stream_rng(seed, 0x5_9117);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (rows, &c) in groups.into_values().zip(&counts) {
        let mut rows = rows;
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..c]);
        test.extend_from_slice(&rows[c..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified k-fold partition of row indices: `(train, validation)` pairs.
pub fn kfold_keys(keys: &[u32], k: usize, seed: u64, name: impl Fn(u32) -> String) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    let groups = strata(keys);
    for (&key, rows) in &groups {
        if rows.len() < k {
            return Err(Error::UndersizedStratum {
                stratum: name(key),
                size: rows.len(),
                required: k,
            });
        }
    }
    let mut rng = stream_rng(seed, 0xF01D);
    let mut fold_of = vec![0usize; keys.len()];
    // the cyclic offset carries across strata so overall fold sizes differ by at most one
    let mut offset = 0usize;
    for mut rows in groups.into_values() {
        rows.shuffle(&mut rng);
        for (pos, &i) in rows.iter().enumerate() {
            fold_of[i] = (offset + pos) % k;
        }
        offset += rows.len();
    }
    Ok((0..k)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..keys.len()).partition(|&i| fold_of[i] == f);
            (train, val)
        })
        .collect())
}

pub fn split_indices(d: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    SplitSpec::new(spec.train_fraction, spec.stratify_on, spec.seed)?;
    let keys = stratum_keys(d, spec.stratify_on)?;
    split_keys(&keys, spec.train_fraction, spec.seed, |k| stratum_name(k, spec.stratify_on))
}

pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(d, spec)?;
    Ok((d.subset(&train), d.subset(&test)))
}

pub fn kfold_indices(d: &Dataset, k: usize, on: Stratify, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let keys = stratum_keys(d, on)?;
    kfold_keys(&keys, k, seed, |key| stratum_name(key, on))
}

pub fn kfold(d: &Dataset, k: usize, on: Stratify, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    Ok(kfold_indices(d, k, on, seed)?
        .into_iter()
        .map(|(tr, va)| (d.subset(&tr), d.subset(&va)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use proptest::prelude::*;

    fn arms(n_treated: usize, n_control: usize) -> Dataset {
        let mut rows = Vec::new();
        for i in 0..n_treated + n_control {
            rows.push(Sample {
                treatment: i < n_treated,
                visit: i % 3 == 0,
                ..Sample::features([i as f64, 0.0, 0.0, 0.0], [0; 8])
            });
        }
        Dataset::new(rows)
    }

    #[test]
    fn eighty_twenty_on_85_15() {
        let d = arms(85, 15);
        let spec = SplitSpec::new(0.8, Stratify::Treatment, 3).unwrap();
        let (train, test) = split(&d, &spec).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(train.n_treated(), 68);
        assert_eq!(train.len() - train.n_treated(), 12);
        assert_eq!(test.n_treated(), 17);
    }

    #[test]
    fn half_split_of_two_row_strata() {
        let d = arms(2, 2);
        let spec = SplitSpec::new(0.5, Stratify::Treatment, 0).unwrap();
        let (train, test) = split(&d, &spec).unwrap();
        assert_eq!((train.n_treated(), train.len()), (1, 2));
        assert_eq!((test.n_treated(), test.len()), (1, 2));
    }

    #[test]
    fn same_seed_same_partition() {
        let d = arms(40, 30);
        let spec = SplitSpec::new(0.7, Stratify::TreatmentAndOutcome(OutcomeLabel::Visit), 11).unwrap();
        assert_eq!(split_indices(&d, &spec).unwrap(), split_indices(&d, &spec).unwrap());
    }

    #[test]
    fn singleton_stratum_is_rejected() {
        let d = arms(10, 1);
        let spec = SplitSpec::new(0.8, Stratify::Treatment, 0).unwrap();
        match split(&d, &spec) {
            Err(Error::UndersizedStratum { stratum, .. }) => assert_eq!(stratum, "treatment=0"),
            other => panic!("{other:?}"),
        }
        assert!(SplitSpec::new(1.0, Stratify::Treatment, 0).is_err());
    }

    #[test]
    fn five_folds_of_twenty() {
        let d = arms(85, 15);
        let folds = kfold_indices(&d, 5, Stratify::Treatment, 9).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = vec![0; 100];
        for (train, val) in &folds {
            assert_eq!(val.len(), 20);
            assert_eq!(train.len(), 80);
            for &i in val {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn undersized_stratum_for_k() {
        let d = arms(10, 3);
        assert!(matches!(
            kfold_indices(&d, 5, Stratify::Treatment, 0),
            Err(Error::UndersizedStratum { required: 5, .. })
        ));
    }

    proptest! {
        #[test]
        fn split_is_a_stratified_partition(n_t in 2usize..200, n_c in 2usize..200, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let d = arms(n_t, n_c);
            let (train, test) = split_indices(&d, &SplitSpec::new(frac, Stratify::Treatment, seed).unwrap()).unwrap();
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n_t + n_c).collect::<Vec<_>>());
            let tr_t = train.iter().filter(|&&i| i < n_t).count();
            let tr_c = train.len() - tr_t;
            prop_assert!((tr_t as f64 - n_t as f64 * frac).abs() < 1.0 + 1e-9 || tr_t == 1 || tr_t == n_t - 1);
            prop_assert!((tr_c as f64 - n_c as f64 * frac).abs() < 1.0 + 1e-9 || tr_c == 1 || tr_c == n_c - 1);
        }

        #[test]
        fn kfold_strata_balanced(n_t in 5usize..120, n_c in 5usize..120, k in 2usize..6, seed in any::<u64>()) {
            let d = arms(n_t, n_c);
            let folds = kfold_indices(&d, k, Stratify::TreatmentAndOutcome(OutcomeLabel::Visit), seed);
            let Ok(folds) = folds else { return Ok(()); };
            let keys = stratum_keys(&d, Stratify::TreatmentAndOutcome(OutcomeLabel::Visit)).unwrap();
            for key in 0..4u32 {
                let total = keys.iter().filter(|&&x| x == key).count() as f64;
                for (_, val) in &folds {
                    let c = val.iter().filter(|&&i| keys[i] == key).count() as f64;
                    prop_assert!((c - total / k as f64).abs() <= 1.0);
                }
            }
        }
    }
}
