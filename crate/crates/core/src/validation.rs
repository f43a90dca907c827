//! Dataset sanity checks: a classifier two-sample test of `T ⫫ X` and the
//! informativeness of features for an outcome relative to a constant guess.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::split_keys;
use crate::error::{Error, Result};
use crate::learners::{log_loss, logistic_fit, GdOptions, LOGISTIC_L2_GRID};
use crate::matrix::Matrix;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct C2stConfig {
    pub n_permutations: usize,
    pub seed: u64,
    /// Fixed penalty of the treatment classifier (`1 / C`).
    pub l2: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for C2stConfig {
    fn default() -> Self {
        Self {
            n_permutations: 99,
            seed: 0,
            l2: 1.0,
            max_iters: 300,
            tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C2stResult {
    /// Held-out log-loss of the treatment classifier.
    pub model_loss: f64,
    pub median_null_loss: f64,
    pub null_losses: Vec<f64>,
    pub p_value: f64,
    pub n_permutations: usize,
}

impl C2stResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value <= level
    }
}

fn labels(t: &[bool]) -> Vec<f64> {
    t.iter().map(|&b| f64::from(u8::from(b))).collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Permutation p-value `(1 + #{null <= model}) / (1 + B)`.
pub fn permutation_p_value(model_loss: f64, null_losses: &[f64]) -> f64 {
    let hits = null_losses.iter().filter(|&&l| l <= model_loss).count();
    (1 + hits) as f64 / (1 + null_losses.len()) as f64
}

/// Classifier two-sample test of treatment against features.
///
/// A logistic classifier is trained on a stratified half of the rows and its
/// log-loss measured on the other half. The null distribution retrains on
/// label-permuted copies of the training half and evaluates against permuted
/// held-out labels; permutation `b` draws from RNG stream `b + 1`.
pub fn c2st(x: &Matrix, t: &[bool], config: &C2stConfig) -> Result<C2stResult> {
    if t.len() != x.rows() {
        return Err(Error::LengthMismatch(t.len(), x.rows()));
    }
    if config.n_permutations < 19 {
        return Err(Error::InvalidArgument(format!(
            "c2st needs at least 19 permutations, got {}",
            config.n_permutations
        )));
    }
    let n_t = t.iter().filter(|&&b| b).count();
    if n_t == 0 || n_t == t.len() {
        return Err(Error::EmptyArm(if n_t == 0 { "treated" } else { "control" }));
    }
    let keys: Vec<u32> = t.iter().map(|&b| u32::from(b)).collect();
    let (train, test) = split_keys(&keys, 0.5, config.seed, |k| {
        if k == 1 { "treated" } else { "control" }.to_string()
    })?;
    let (xtr, xte) = (x.select_rows(&train), x.select_rows(&test));
    let ytr: Vec<f64> = labels(&train.iter().map(|&i| t[i]).collect::<Vec<_>>());
    let yte: Vec<f64> = labels(&test.iter().map(|&i| t[i]).collect::<Vec<_>>());
    let opts = GdOptions {
        max_iters: config.max_iters,
        tol: config.tol,
    };
    let loss = |ytr: &[f64], yte: &[f64]| -> Result<f64> {
        let m = logistic_fit(&xtr, ytr, None, config.l2, None, opts)?;
        Ok(log_loss(yte, &m.predict(&xte)))
    };

    let model_loss = loss(&ytr, &yte)?;
    let null_losses = (0..config.n_permutations)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(config.seed, b as u64 + 1);
            let (mut a, mut c) = (ytr.clone(), yte.clone());
            a.shuffle(&mut rng);
            c.shuffle(&mut rng);
            loss(&a, &c)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(C2stResult {
        model_loss,
        median_null_loss: median(&null_losses),
        p_value: permutation_p_value(model_loss, &null_losses),
        n_permutations: config.n_permutations,
        null_losses,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DummyComparison {
    pub model_loss: f64,
    pub dummy_loss: f64,
    /// `100 (LL_dummy - LL_model) / LL_dummy`.
    pub improvement: f64,
    /// Penalty selected on the inner holdout.
    pub l2: f64,
}

pub fn relative_improvement(dummy_loss: f64, model_loss: f64) -> f64 {
    100.0 * (dummy_loss - model_loss) / dummy_loss
}

/// Log-loss gain of a tuned logistic classifier over the train-set base rate,
/// both evaluated on a stratified 20% test split. The penalty is chosen from
/// the three strongest grid values on a 25% holdout of the training rows.
pub fn dummy_improvement(x: &Matrix, y: &[f64], seed: u64) -> Result<DummyComparison> {
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch(y.len(), x.rows()));
    }
    if let Some(&v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinary(v));
    }
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::InvalidArgument("outcome has a single class".into()));
    }
    let keys: Vec<u32> = y.iter().map(|&v| v as u32).collect();
    let name = |k: u32| format!("y={k}");
    let (train, test) = split_keys(&keys, 0.8, seed, name)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect::<Vec<f64>>();
    let (xtr, ytr) = (x.select_rows(&train), pick(&train));
    let (xte, yte) = (x.select_rows(&test), pick(&test));

    let inner_keys: Vec<u32> = ytr.iter().map(|&v| v as u32).collect();
    let (fit_idx, hold_idx) = split_keys(&inner_keys, 0.75, seed.wrapping_add(1), name)?;
    let (xf, yf) = (xtr.select_rows(&fit_idx), fit_idx.iter().map(|&i| ytr[i]).collect::<Vec<_>>());
    let (xh, yh) = (xtr.select_rows(&hold_idx), hold_idx.iter().map(|&i| ytr[i]).collect::<Vec<_>>());
    let opts = GdOptions::default();
    let mut best = (f64::INFINITY, LOGISTIC_L2_GRID[0]);
    for &l2 in &LOGISTIC_L2_GRID[..3] {
        let m = logistic_fit(&xf, &yf, None, l2, None, opts)?;
        let ll = log_loss(&yh, &m.predict(&xh));
        if ll < best.0 {
            best = (ll, l2);
        }
    }
    let l2 = best.1;
    let model = logistic_fit(&xtr, &ytr, None, l2, None, opts)?;
    let model_loss = log_loss(&yte, &model.predict(&xte));
    let rate = ytr.iter().sum::<f64>() / ytr.len() as f64;
    let dummy_loss = log_loss(&yte, &vec![rate; yte.len()]);
    Ok(DummyComparison {
        model_loss,
        dummy_loss,
        improvement: relative_improvement(dummy_loss, model_loss),
        l2,
    })
}
