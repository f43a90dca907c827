//! Per-user samples, datasets and the operations that prepare them for
//! learning: ingestion, constraint checks, encoding, splitting and
//! rebalancing.

mod constraints;
mod encode;
mod io;
mod rebalance;
mod split;

pub use constraints::{validate_constraints, ConstraintReport};
pub use encode::{encode, ColumnSpec, EncodedMatrix, Encoder};
pub use io::{load_csv, load_csv_with_schema, write_csv, Schema};
pub use rebalance::rebalance;
pub use split::{kfold, kfold_indices, kfold_keys, split, split_indices, split_keys, SplitSpec, Stratify};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_CONTINUOUS: usize = 4;
pub const N_CATEGORICAL: usize = 8;

/// Default column names for the continuous features, in encoding order.
pub const CONTINUOUS_COLUMNS: [&str; N_CONTINUOUS] = ["f0", "f2", "f7", "f10"];
/// Default column names for the categorical features, in encoding order.
pub const CATEGORICAL_COLUMNS: [&str; N_CATEGORICAL] =
    ["f1", "f3", "f4", "f5", "f6", "f8", "f9", "f11"];

/// One user of an incrementality test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub continuous: [f64; N_CONTINUOUS],
    pub categorical: [u32; N_CATEGORICAL],
    pub treatment: bool,
    pub exposure: bool,
    pub visit: bool,
    pub conversion: bool,
    /// Real-valued outcome, present on generated ITE corpora only.
    pub outcome: Option<f64>,
}

impl Sample {
    pub fn features(continuous: [f64; N_CONTINUOUS], categorical: [u32; N_CATEGORICAL]) -> Self {
        Self {
            continuous,
            categorical,
            treatment: false,
            exposure: false,
            visit: false,
            conversion: false,
            outcome: None,
        }
    }
}

/// Which label a learner or a metric reads from a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeLabel {
    Visit,
    Conversion,
    Continuous,
}

impl OutcomeLabel {
    pub fn value(self, s: &Sample) -> Option<f64> {
        match self {
            OutcomeLabel::Visit => Some(f64::from(u8::from(s.visit))),
            OutcomeLabel::Conversion => Some(f64::from(u8::from(s.conversion))),
            OutcomeLabel::Continuous => s.outcome,
        }
    }
}

/// Per-row origin of a concatenation of several tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sources {
    pub tags: Vec<String>,
    pub row: Vec<u32>,
}

/// Ordered, immutable collection of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    source_tag: Option<String>,
    sources: Option<Sources>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self {
            samples,
            source_tag: None,
            sources: None,
        }
    }

    pub fn with_source_tag(mut self, tag: impl Into<String>) -> Self {
        self.source_tag = Some(tag.into());
        self
    }

    pub(crate) fn with_sources(mut self, sources: Sources) -> Self {
        self.sources = Some(sources);
        self
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn source_tag(&self) -> Option<&str> {
        self.source_tag.as_deref()
    }

    pub fn sources(&self) -> Option<&Sources> {
        self.sources.as_ref()
    }

    pub fn n_treated(&self) -> usize {
        self.samples.iter().filter(|s| s.treatment).count()
    }

    pub fn treatment_ratio(&self) -> f64 {
        if self.is_empty() {
            return f64::NAN;
        }
        self.n_treated() as f64 / self.len() as f64
    }

    pub fn visit_rate(&self) -> f64 {
        self.samples.iter().filter(|s| s.visit).count() as f64 / self.len() as f64
    }

    pub fn conversion_rate(&self) -> f64 {
        self.samples.iter().filter(|s| s.conversion).count() as f64 / self.len() as f64
    }

    pub fn treatments(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.treatment).collect()
    }

    pub fn labels(&self, label: OutcomeLabel) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| {
                label
                    .value(s)
                    .ok_or_else(|| Error::Schema("dataset has no continuous outcome column".into()))
            })
            .collect()
    }

    pub fn has_outcome(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.outcome.is_some())
    }

    /// Rows at `idx`, in that order. Keeps the tag and per-row sources.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let samples = idx.iter().map(|&i| self.samples[i].clone()).collect();
        let sources = self.sources.as_ref().map(|s| Sources {
            tags: s.tags.clone(),
            row: idx.iter().map(|&i| s.row[i]).collect(),
        });
        Dataset {
            samples,
            source_tag: self.source_tag.clone(),
            sources,
        }
    }
}
