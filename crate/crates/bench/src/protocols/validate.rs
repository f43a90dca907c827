//! Structural checks, the treatment two-sample test and feature informativeness.

use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};
use uplift_core::data::{validate_constraints, ConstraintReport, OutcomeLabel};
use uplift_core::rng::derive_seed;
use uplift_core::validation::{c2st, dummy_improvement, C2stConfig, C2stResult, DummyComparison};

use super::streams;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::source::load_corpus;

/// Published statistics of the full incrementality-test corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusReference {
    pub n: usize,
    pub treatment_ratio: f64,
    pub visit_rate: f64,
    pub conversion_rate: f64,
}

pub const REFERENCE: CorpusReference = CorpusReference {
    n: 13_979_592,
    treatment_ratio: 0.85,
    visit_rate: 0.0470,
    conversion_rate: 0.0029,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCheck {
    pub outcome: OutcomeLabel,
    pub comparison: Option<DummyComparison>,
    /// Why the comparison is missing.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateReport {
    pub origin: String,
    pub n: usize,
    pub treatment_ratio: f64,
    pub visit_rate: f64,
    pub conversion_rate: f64,
    pub reference: CorpusReference,
    pub constraints: ConstraintReport,
    pub c2st: C2stResult,
    pub dummy: Vec<OutcomeCheck>,
}

impl ValidateReport {
    pub fn render(&self) -> String {
        let r = &self.reference;
        let mut out = format!("validation of {}\n\n{:<18} | {:>12} | {:>12}\n", self.origin, "statistic", "observed", "reference");
        let _ = writeln!(out, "{:<18} | {:>12} | {:>12}", "rows", self.n, r.n);
        for (name, v, rv) in [
            ("treatment ratio", self.treatment_ratio, r.treatment_ratio),
            ("visit rate", self.visit_rate, r.visit_rate),
            ("conversion rate", self.conversion_rate, r.conversion_rate),
        ] {
            let _ = writeln!(out, "{name:<18} | {v:>12.5} | {rv:>12.5}");
        }
        let _ = writeln!(
            out,
            "\nconstraint violations: control exposed {}, conversion without visit {}",
            self.constraints.control_exposed, self.constraints.conversion_without_visit
        );
        let c = &self.c2st;
        let _ = writeln!(
            out,
            "\nC2ST (T vs X, {} permutations)\n  median null loss {:.5}\n  model loss       {:.5}\n  p-value          {:.5}",
            c.n_permutations, c.median_null_loss, c.model_loss, c.p_value
        );
        let _ = writeln!(out, "\nimprovement over a dummy classifier");
        for d in &self.dummy {
            let name = format!("{:?}", d.outcome).to_lowercase();
            let _ = match &d.comparison {
                Some(c) => writeln!(
                    out,
                    "  {name:<11} {:>8.2}%  (model {:.5}, dummy {:.5}, l2 {:e})",
                    c.improvement, c.model_loss, c.dummy_loss, c.l2
                ),
                None => writeln!(out, "  {name:<11} missing: {}", d.error.as_deref().unwrap_or("?")),
            };
        }
        out
    }
}

pub fn run_validate(config: &ExperimentConfig) -> Result<ValidateReport> {
    let corpus = load_corpus(config)?;
    let d = &corpus.dataset;
    let v = &config.validate;
    let c2st = c2st(
        &corpus.x,
        &d.treatments(),
        &C2stConfig {
            n_permutations: v.n_permutations,
            seed: derive_seed(config.seed, streams::C2ST),
            l2: v.c2st_l2,
            ..Default::default()
        },
    )?;
    let dummy = v
        .outcomes
        .iter()
        .map(|&outcome| {
            let y = d.labels(outcome)?;
            // a label without both classes (e.g. visits of a continuous corpus) is reported, not fatal
            Ok(match dummy_improvement(&corpus.x, &y, derive_seed(config.seed, streams::DUMMY)) {
                Ok(c) => OutcomeCheck { outcome, comparison: Some(c), error: None },
                Err(e @ uplift_core::Error::InvalidArgument(_)) => {
                    warn!("{outcome:?} check skipped: {e}");
                    OutcomeCheck { outcome, comparison: None, error: Some(e.to_string()) }
                }
                Err(e) => return Err(e.into()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidateReport {
        origin: corpus.origin.clone(),
        n: d.len(),
        treatment_ratio: d.treatment_ratio(),
        visit_rate: d.visit_rate(),
        conversion_rate: d.conversion_rate(),
        reference: REFERENCE,
        constraints: validate_constraints(d),
        c2st,
        dummy,
    })
}
