//! √PEHE of ITE learners over repeated generator realizations.

use std::fmt::Write as _;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use uplift_core::data::{split_keys, OutcomeLabel};
use uplift_core::learners::{tune, CvObjective, LearnerConfig, LearnerRegistry, TrainingData, UpliftLearner, UpliftScorer};
use uplift_core::matrix::mean;
use uplift_core::metrics::pehe;
use uplift_core::rng::derive_seed;
use uplift_core::synth::{generate_ite_dataset, GeneratorConfig, OutcomeMode, SurfaceKind};

use super::{fmt_opt, sample_std, streams};
use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};

pub const ORACLE: &str = "oracle";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IteCell {
    pub surface: SurfaceKind,
    pub realization: usize,
    /// Generator seed of the realization.
    pub seed: u64,
    pub method: String,
    pub sqrt_pehe: Option<f64>,
    pub best: Option<LearnerConfig>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IteSummary {
    pub surface: SurfaceKind,
    pub method: String,
    pub mean: Option<f64>,
    /// Sample standard deviation over realizations.
    pub std: Option<f64>,
    pub n_ok: usize,
    pub n_missing: usize,
    pub incomplete: bool,
    /// Lowest mean among the learners of this surface.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IteReport {
    pub n: usize,
    pub train_fraction: f64,
    pub cv_folds: usize,
    pub n_realizations: usize,
    pub surfaces: Vec<SurfaceKind>,
    pub methods: Vec<String>,
    pub cells: Vec<IteCell>,
    pub summary: Vec<IteSummary>,
}

impl IteReport {
    pub fn summary_for(&self, surface: SurfaceKind, method: &str) -> Option<&IteSummary> {
        self.summary.iter().find(|s| s.surface == surface && s.method == method)
    }

    /// √PEHE of `method` per realization, `None` where it failed.
    pub fn series(&self, surface: SurfaceKind, method: &str) -> Vec<Option<f64>> {
        self.cells
            .iter()
            .filter(|c| c.surface == surface && c.method == method)
            .map(|c| c.sqrt_pehe)
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "sqrt(PEHE) on the test half, mean ± std over {} realizations of n={} (* = best)\n\n{:<14}",
            self.n_realizations, self.n, "method"
        );
        for s in &self.surfaces {
            let _ = write!(out, " | {:^22}", s.name());
        }
        out.push('\n');
        let mut names = self.methods.clone();
        if self.cells.iter().any(|c| c.method == ORACLE) {
            names.push(ORACLE.into());
        }
        for m in &names {
            let _ = write!(out, "{m:<14}");
            for &s in &self.surfaces {
                let v = match self.summary_for(s, m) {
                    Some(sm) if sm.mean.is_some() => format!(
                        "{}{} ± {}{}",
                        if sm.best { "*" } else { "" },
                        fmt_opt(sm.mean, 4),
                        fmt_opt(sm.std, 4),
                        if sm.incomplete { format!(" ({} missing)", sm.n_missing) } else { String::new() }
                    ),
                    _ => "missing".into(),
                };
                let _ = write!(out, " | {v:^22}");
            }
            out.push('\n');
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("surface,realization,seed,method,sqrt_pehe,l2,effect_l2\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.surface.name(),
                c.realization,
                c.seed,
                c.method,
                c.sqrt_pehe.map_or(String::new(), |v| v.to_string()),
                c.best.map_or(String::new(), |b| b.l2().to_string()),
                c.best.map_or(String::new(), |b| b.effect_l2.to_string()),
            );
        }
        out
    }
}

fn run_realization(
    config: &ExperimentConfig,
    gen: &GeneratorConfig,
    learners: &[(String, std::sync::Arc<dyn UpliftLearner>)],
    realization: usize,
) -> Vec<IteCell> {
    let ite = &config.ite;
    let cell = |method: &str, sqrt_pehe, best, error| IteCell {
        surface: gen.surface,
        realization,
        seed: gen.seed,
        method: method.to_string(),
        sqrt_pehe,
        best,
        error,
    };
    let fail_all = |e: String| {
        warn!("{} realization {realization} failed: {e}", gen.surface.name());
        learners.iter().map(|(m, _)| cell(m, None, None, Some(e.clone()))).collect()
    };
    let g = match generate_ite_dataset(gen) {
        Ok(g) => g,
        Err(e) => return fail_all(e.to_string()),
    };
    let t = g.dataset.treatments();
    let y = match g.dataset.labels(OutcomeLabel::Continuous) {
        Ok(y) => y,
        Err(e) => return fail_all(e.to_string()),
    };
    let keys: Vec<u32> = t.iter().map(|&b| u32::from(b)).collect();
    let arm = |k: u32| if k == 1 { "treated" } else { "control" }.to_string();
    let (train, test) = match split_keys(&keys, ite.train_fraction, derive_seed(gen.seed, streams::SPLIT), arm) {
        Ok(s) => s,
        Err(e) => return fail_all(e.to_string()),
    };
    let x = &g.encoded.matrix;
    let (xtr, xte) = (x.select_rows(&train), x.select_rows(&test));
    let pick = |idx: &[usize], v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let (ytr, tau_tr, tau_te) = (pick(&train, &y), pick(&train, &g.truth.tau), pick(&test, &g.truth.tau));
    let ttr: Vec<bool> = train.iter().map(|&i| t[i]).collect();
    let data = match TrainingData::new(&xtr, &ytr, &ttr) {
        Ok(d) => d,
        Err(e) => return fail_all(e.to_string()),
    };

    let mut cells: Vec<IteCell> = learners
        .iter()
        .map(|(name, learner)| {
            let outcome = tune(
                learner.as_ref(),
                &config.grid_for(learner.as_ref()),
                &data,
                CvObjective::Pehe { tau: &tau_tr },
                ite.cv_folds,
                derive_seed(gen.seed, streams::CV),
            )
            .and_then(|r| {
                let model = learner.fit(&data, &r.best)?;
                Ok((pehe(&tau_te, &model.score_matrix(&xte))?, r.best))
            });
            match outcome {
                Ok((v, best)) => cell(name, Some(v), Some(best), None),
                Err(e) => {
                    warn!("{name} on {} realization {realization} failed: {e}", gen.surface.name());
                    cell(name, None, None, Some(e.to_string()))
                }
            }
        })
        .collect();
    if ite.include_oracle {
        cells.push(cell(ORACLE, pehe(&tau_te, &tau_te).ok(), None, None));
    }
    info!("{} realization {realization} done", gen.surface.name());
    cells
}

pub fn run_ite_benchmark(config: &ExperimentConfig) -> Result<IteReport> {
    let ite = &config.ite;
    let base = config
        .generator()
        .ok_or_else(|| BenchError::Config("the ITE benchmark needs a [generator] section".into()))?;
    if base.outcome != OutcomeMode::Continuous {
        return Err(BenchError::Config("the ITE benchmark needs continuous outcomes".into()));
    }
    let registry = LearnerRegistry::with_builtins();
    let learners = config
        .methods
        .iter()
        .map(|m| Ok((m.clone(), registry.get(m)?)))
        .collect::<Result<Vec<_>>>()?;

    let items: Vec<(SurfaceKind, usize)> = ite
        .surfaces
        .iter()
        .flat_map(|&s| (0..ite.n_realizations).map(move |r| (s, r)))
        .collect();
    // items are independent; par_iter keeps their order
    let cells: Vec<IteCell> = items
        .par_iter()
        .flat_map_iter(|&(surface, r)| {
            let gen = GeneratorConfig { surface, ..base.clone() }.for_realization(r as u64);
            run_realization(config, &gen, &learners, r)
        })
        .collect();

    let mut names: Vec<String> = config.methods.clone();
    if ite.include_oracle {
        names.push(ORACLE.into());
    }
    let mut summary = Vec::new();
    for &surface in &ite.surfaces {
        let first = summary.len();
        for m in &names {
            let vals: Vec<f64> = cells
                .iter()
                .filter(|c| c.surface == surface && &c.method == m)
                .filter_map(|c| c.sqrt_pehe)
                .collect();
            let n_missing = ite.n_realizations - vals.len();
            summary.push(IteSummary {
                surface,
                method: m.clone(),
                mean: (!vals.is_empty()).then(|| mean(&vals)),
                std: (vals.len() >= 2).then(|| sample_std(&vals)),
                n_ok: vals.len(),
                n_missing,
                incomplete: n_missing > 0,
                best: false,
            });
        }
        let best = summary[first..]
            .iter()
            .filter(|s| s.method != ORACLE)
            .filter_map(|s| s.mean)
            .min_by(f64::total_cmp);
        for s in &mut summary[first..] {
            s.best = s.method != ORACLE && s.mean.is_some() && s.mean == best;
        }
    }
    Ok(IteReport {
        n: base.n,
        train_fraction: ite.train_fraction,
        cv_folds: ite.cv_folds,
        n_realizations: ite.n_realizations,
        surfaces: ite.surfaces.clone(),
        methods: config.methods.clone(),
        cells,
        summary,
    })
}
