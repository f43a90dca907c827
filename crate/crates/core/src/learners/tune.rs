//! Grid search with stratified k-fold cross-validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LearnerConfig, TrainingData, UpliftLearner, UpliftScorer};
use crate::data::kfold_keys;
use crate::error::{Error, Result};
use crate::metrics::{auuc_score, pehe};

/// Validation criterion of the grid search.
#[derive(Debug, Clone, Copy)]
pub enum CvObjective<'a> {
    /// Maximize the mean validation AUUC; folds stratified on treatment and
    /// (binary) outcome.
    Auuc { bins: usize },
    /// Minimize the mean validation √PEHE against the true effects of the
    /// training rows; folds stratified on treatment.
    Pehe { tau: &'a [f64] },
}

impl CvObjective<'_> {
    fn maximize(&self) -> bool {
        matches!(self, CvObjective::Auuc { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CvObjective::Auuc { .. } => "auuc",
            CvObjective::Pehe { .. } => "sqrt_pehe",
        }
    }
}

/// One grid point of the cross-validation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub config: LearnerConfig,
    pub fold_scores: Vec<f64>,
    /// Mean over folds; `None` when any fold failed.
    pub mean: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub objective: String,
    pub best: LearnerConfig,
    pub best_score: f64,
    pub table: Vec<CvRow>,
}

fn fold_keys(data: &TrainingData<'_>, objective: &CvObjective<'_>) -> Vec<u32> {
    let binary = data.y.iter().all(|&v| v == 0.0 || v == 1.0);
    data.t
        .iter()
        .zip(data.y)
        .map(|(&t, &y)| match objective {
            CvObjective::Auuc { .. } if binary => 2 * u32::from(t) + u32::from(y == 1.0),
            _ => u32::from(t),
        })
        .collect()
}

fn stratum_name(key: u32) -> String {
    let arm = if key & 2 != 0 || key == 1 { "treated" } else { "control" };
    arm.to_string()
}

fn evaluate_fold(
    learner: &dyn UpliftLearner,
    config: &LearnerConfig,
    data: &TrainingData<'_>,
    objective: &CvObjective<'_>,
    train: &[usize],
    val: &[usize],
) -> Result<f64> {
    let pick = |idx: &[usize], v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let xt = data.x.select_rows(train);
    let yt = pick(train, data.y);
    let tt: Vec<bool> = train.iter().map(|&i| data.t[i]).collect();
    let model = learner.fit(&TrainingData::new(&xt, &yt, &tt)?, config)?;
    let scores = model.score_matrix(&data.x.select_rows(val));
    let value = match objective {
        CvObjective::Auuc { bins } => {
            let yv = pick(val, data.y);
            let tv: Vec<bool> = val.iter().map(|&i| data.t[i]).collect();
            let n_t = tv.iter().filter(|&&b| b).count();
            let k = (*bins).min(n_t).min(tv.len() - n_t).max(1);
            auuc_score(&scores, &yv, &tv, k)?
        }
        CvObjective::Pehe { tau } => pehe(&pick(val, tau), &scores)?,
    };
    if !value.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite validation score {value}")));
    }
    Ok(value)
}

/// Picks the grid point with the best mean validation score. Ties go to the
/// larger penalty (effect stage first, then base learner); grid points with
/// any failing fold are marked invalid.
pub fn tune(
    learner: &dyn UpliftLearner,
    grid: &[LearnerConfig],
    data: &TrainingData<'_>,
    objective: CvObjective<'_>,
    k: usize,
    seed: u64,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    if let CvObjective::Pehe { tau } = objective {
        if tau.len() != data.len() {
            return Err(Error::LengthMismatch(tau.len(), data.len()));
        }
    }
    let folds = kfold_keys(&fold_keys(data, &objective), k, seed, stratum_name)?;

    let cells: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..k).map(move |f| (g, f))).collect();
    let results: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(g, f)| evaluate_fold(learner, &grid[g], data, &objective, &folds[f].0, &folds[f].1))
        .collect();

    let mut table = Vec::with_capacity(grid.len());
    for (g, config) in grid.iter().enumerate() {
        let mut fold_scores = Vec::with_capacity(k);
        let mut error = None;
        for r in &results[g * k..(g + 1) * k] {
            match r {
                Ok(v) => fold_scores.push(*v),
                Err(e) => {
                    error.get_or_insert_with(|| e.to_string());
                }
            }
        }
        let mean = error.is_none().then(|| fold_scores.iter().sum::<f64>() / k as f64);
        if let Some(e) = &error {
            log::warn!("{} with l2={} marked invalid: {e}", learner.name(), config.l2());
        }
        table.push(CvRow {
            config: *config,
            fold_scores,
            mean,
            error,
        });
    }

    let sign = if objective.maximize() { 1.0 } else { -1.0 };
    let best = table
        .iter()
        .filter_map(|row| row.mean.map(|m| (row, sign * m)))
        .reduce(|a, b| {
            let penalty = |c: &LearnerConfig| (c.effect_l2, c.l2());
            if b.1 > a.1 || (b.1 == a.1 && penalty(&b.0.config) > penalty(&a.0.config)) {
                b
            } else {
                a
            }
        })
        .ok_or_else(|| Error::AllInvalid(learner.name().to_string()))?;
    Ok(TuneResult {
        objective: objective.name().to_string(),
        best: best.0.config,
        best_score: best.0.mean.expect("valid row"),
        table: table.clone(),
    })
}
