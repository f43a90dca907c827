//! AUUC separability of uplift models on nested test subsamples.

use std::fmt::Write as _;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use uplift_core::data::{split_keys, OutcomeLabel};
use uplift_core::learners::{tune, CvObjective, LearnerConfig, LearnerRegistry, TrainingData, UpliftScorer};
use uplift_core::matrix::std_dev;
use uplift_core::metrics::{auuc_ci, MetricResult};
use uplift_core::rng::{derive_seed, stream_rng};
use uplift_core::Error as CoreError;

use super::{fmt_opt, streams};
use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::source::load_corpus;

pub const ORACLE: &str = "oracle";
pub const NOISED_ORACLE: &str = "noised-oracle";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedMethod {
    pub method: String,
    pub best: Option<LearnerConfig>,
    /// Mean validation AUUC of the selected configuration.
    pub cv_auuc: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuucCell {
    pub size: usize,
    pub method: String,
    pub auuc: Option<MetricResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub size: usize,
    /// Every pair of available intervals intersects.
    pub all_overlap: bool,
    pub separated_pairs: Vec<(String, String)>,
    /// Whether the oracle and its noised copy are separated.
    pub planted_separated: Option<bool>,
    /// Some method has no value at this size.
    pub incomplete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPair {
    /// Standard deviation of the true effect over the corpus.
    pub tau_sd: f64,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    pub origin: String,
    pub label: OutcomeLabel,
    pub n_train: usize,
    pub n_test: usize,
    pub bins: usize,
    pub n_bootstrap: usize,
    pub bootstrap_seed: u64,
    pub methods: Vec<TunedMethod>,
    pub planted: Option<PlantedPair>,
    pub sizes: Vec<usize>,
    pub skipped_sizes: Vec<usize>,
    pub cells: Vec<AuucCell>,
    pub summary: Vec<SizeSummary>,
}

impl SeparabilityReport {
    pub fn cell(&self, size: usize, method: &str) -> Option<&MetricResult> {
        self.cells
            .iter()
            .find(|c| c.size == size && c.method == method)
            .and_then(|c| c.auuc.as_ref())
    }

    pub fn scorers(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !names.contains(&c.method.as_str()) {
                names.push(&c.method);
            }
        }
        names
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "separability on {} ({} label): {} train / {} test rows, K={}, B={}\n",
            self.origin,
            label_name(self.label),
            self.n_train,
            self.n_test,
            self.bins,
            self.n_bootstrap
        );
        for m in &self.methods {
            match (&m.best, &m.error) {
                (Some(b), _) => {
                    let _ = writeln!(
                        out,
                        "  {:<14} l2={:e} effect_l2={:e} cv_auuc={}",
                        m.method,
                        b.l2(),
                        b.effect_l2,
                        fmt_opt(m.cv_auuc, 5)
                    );
                }
                (None, e) => {
                    let _ = writeln!(out, "  {:<14} FAILED: {}", m.method, e.as_deref().unwrap_or("?"));
                }
            }
        }
        let _ = write!(out, "\n{:<14}", "method");
        for s in &self.sizes {
            let _ = write!(out, " | {:^32}", format!("n={s}"));
        }
        out.push('\n');
        for name in self.scorers() {
            let _ = write!(out, "{name:<14}");
            for &s in &self.sizes {
                let v = match self.cell(s, name) {
                    Some(r) => format!(
                        "{:.5} [{:.5}, {:.5}]",
                        r.value,
                        r.ci_low.unwrap_or(f64::NAN),
                        r.ci_high.unwrap_or(f64::NAN)
                    ),
                    None => "missing".into(),
                };
                let _ = write!(out, " | {v:^32}");
            }
            out.push('\n');
        }
        out.push('\n');
        for s in &self.summary {
            let _ = writeln!(
                out,
                "n={:<8} all CIs overlap: {:<5} separated pairs: {:<3} planted pair separated: {}{}",
                s.size,
                s.all_overlap,
                s.separated_pairs.len(),
                s.planted_separated.map_or("n/a".to_string(), |b| b.to_string()),
                if s.incomplete { "  (incomplete)" } else { "" }
            );
        }
        if !self.skipped_sizes.is_empty() {
            let _ = writeln!(out, "skipped sizes larger than the test set: {:?}", self.skipped_sizes);
        }
        out
    }

    /// AUUC and interval per (size, method), for plotting.
    pub fn csv(&self) -> String {
        let mut out = String::from("size,method,auuc,ci_low,ci_high,ci_width\n");
        for c in &self.cells {
            let r = c.auuc.as_ref();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.size,
                c.method,
                r.map_or(String::new(), |r| r.value.to_string()),
                r.and_then(|r| r.ci_low).map_or(String::new(), |v| v.to_string()),
                r.and_then(|r| r.ci_high).map_or(String::new(), |v| v.to_string()),
                r.and_then(|r| r.ci_width()).map_or(String::new(), |v| v.to_string()),
            );
        }
        out
    }
}

fn label_name(label: OutcomeLabel) -> &'static str {
    match label {
        OutcomeLabel::Visit => "visit",
        OutcomeLabel::Conversion => "conversion",
        OutcomeLabel::Continuous => "continuous",
    }
}

pub fn run_separability(config: &ExperimentConfig) -> Result<SeparabilityReport> {
    let sep = &config.separability;
    let corpus = load_corpus(config)?;
    let t = corpus.dataset.treatments();
    let y = corpus.dataset.labels(sep.label)?;
    if let Some(&v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(BenchError::Data(CoreError::NonBinary(v)));
    }
    let keys: Vec<u32> = t.iter().zip(&y).map(|(&t, &y)| 2 * u32::from(t) + u32::from(y == 1.0)).collect();
    let stratum = |k: u32| format!("{} / y={}", if k >= 2 { "treated" } else { "control" }, k % 2);
    let (mut train, mut test) = split_keys(&keys, sep.train_fraction, derive_seed(config.seed, streams::SPLIT), stratum)?;
    // nested subsamples are prefixes of one shuffled test set
    test.shuffle(&mut stream_rng(config.seed, streams::TEST_ORDER));
    if let Some(m) = sep.max_train_rows {
        if train.len() > m {
            train.shuffle(&mut stream_rng(config.seed, streams::TRAIN_SUBSAMPLE));
            train.truncate(m);
            train.sort_unstable();
        }
    }
    let pick = |idx: &[usize]| -> (Vec<f64>, Vec<bool>) { (idx.iter().map(|&i| y[i]).collect(), idx.iter().map(|&i| t[i]).collect()) };
    let xtr = corpus.x.select_rows(&train);
    let xte = corpus.x.select_rows(&test);
    let (ytr, ttr) = pick(&train);
    let (yte, tte) = pick(&test);
    let data = TrainingData::new(&xtr, &ytr, &ttr)?;

    let registry = LearnerRegistry::with_builtins();
    let mut methods = Vec::new();
    let mut scorers: Vec<(String, Option<Vec<f64>>, Option<String>)> = Vec::new();
    for name in &config.methods {
        let learner = registry.get(name)?;
        let grid = config.grid_for(learner.as_ref());
        info!("tuning {name} over {} configurations", grid.len());
        let outcome = tune(
            learner.as_ref(),
            &grid,
            &data,
            CvObjective::Auuc { bins: sep.bins },
            sep.cv_folds,
            derive_seed(config.seed, streams::CV),
        )
        .and_then(|r| Ok((learner.fit(&data, &r.best)?, r)));
        match outcome {
            Ok((model, r)) => {
                scorers.push((name.clone(), Some(model.score_matrix(&xte)), None));
                methods.push(TunedMethod {
                    method: name.clone(),
                    best: Some(r.best),
                    cv_auuc: Some(r.best_score),
                    error: None,
                });
            }
            Err(e) => {
                warn!("{name} failed: {e}");
                scorers.push((name.clone(), None, Some(e.to_string())));
                methods.push(TunedMethod {
                    method: name.clone(),
                    best: None,
                    cv_auuc: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }

    let mut planted = None;
    if sep.planted_pair {
        match &corpus.truth {
            Some(truth) => {
                let tau_sd = std_dev(&truth.tau);
                let noise_sd = sep.planted_noise * tau_sd;
                let mut rng = stream_rng(config.seed, streams::PLANTED_NOISE);
                let oracle: Vec<f64> = test.iter().map(|&i| truth.tau[i]).collect();
                let noised = oracle
                    .iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + noise_sd * z
                    })
                    .collect();
                scorers.push((ORACLE.into(), Some(oracle), None));
                scorers.push((NOISED_ORACLE.into(), Some(noised), None));
                planted = Some(PlantedPair { tau_sd, noise_sd });
            }
            None => warn!("planted pair needs ground truth; skipped for {}", corpus.origin),
        }
    }

    let bootstrap_seed = derive_seed(config.seed, streams::BOOTSTRAP);
    let (mut sizes, mut skipped_sizes) = (Vec::new(), Vec::new());
    let mut cells = Vec::new();
    let mut summary = Vec::new();
    for &size in &config.separability.test_sizes {
        if size > test.len() {
            warn!("test size {size} exceeds the {} test rows; skipped", test.len());
            skipped_sizes.push(size);
            continue;
        }
        sizes.push(size);
        let (ys, ts) = (&yte[..size], &tte[..size]);
        let n_t = ts.iter().filter(|&&b| b).count();
        let bins = sep.bins.min(n_t).min(size - n_t).max(1);
        let first = cells.len();
        for (name, scores, error) in &scorers {
            let (auuc, error) = match scores {
                Some(s) => match auuc_ci(&s[..size], ys, ts, bins, sep.n_bootstrap, bootstrap_seed) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                },
                None => (None, error.clone()),
            };
            cells.push(AuucCell {
                size,
                method: name.clone(),
                auuc,
                error,
            });
        }
        summary.push(summarize(size, &cells[first..]));
    }
    Ok(SeparabilityReport {
        origin: corpus.origin,
        label: sep.label,
        n_train: train.len(),
        n_test: test.len(),
        bins: sep.bins,
        n_bootstrap: sep.n_bootstrap,
        bootstrap_seed,
        methods,
        planted,
        sizes,
        skipped_sizes,
        cells,
        summary,
    })
}

fn summarize(size: usize, cells: &[AuucCell]) -> SizeSummary {
    let available: Vec<(&str, &MetricResult)> = cells
        .iter()
        .filter_map(|c| c.auuc.as_ref().map(|r| (c.method.as_str(), r)))
        .collect();
    let mut separated_pairs = Vec::new();
    let mut planted_separated = None;
    for (i, (a, ra)) in available.iter().enumerate() {
        for (b, rb) in &available[i + 1..] {
            let separated = ra.overlaps(rb) == Some(false);
            if separated {
                separated_pairs.push((a.to_string(), b.to_string()));
            }
            if *a == ORACLE && *b == NOISED_ORACLE {
                planted_separated = Some(separated);
            }
        }
    }
    SizeSummary {
        size,
        all_overlap: separated_pairs.is_empty(),
        separated_pairs,
        planted_separated,
        incomplete: available.len() < cells.len(),
    }
}
