use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uplift_core::data::{OutcomeLabel, Schema};
use uplift_core::learners::{LearnerConfig, LearnerRegistry, UpliftLearner};
use uplift_core::synth::{GeneratorConfig, SurfaceKind};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Separability,
    IteBenchmark,
    Generate,
    Validate,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Separability => "separability",
            Protocol::IteBenchmark => "ite-benchmark",
            Protocol::Generate => "generate",
            Protocol::Validate => "validate",
        }
    }
}

/// A CSV file in the incrementality-test layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub path: PathBuf,
    /// Defaults to a `.gz` extension check.
    #[serde(default)]
    pub gzip: Option<bool>,
    /// TOML file with custom column names.
    #[serde(default)]
    pub schema: Option<PathBuf>,
}

impl DataSource {
    pub fn gzip(&self) -> bool {
        self.gzip
            .unwrap_or_else(|| self.path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz")))
    }

    pub fn schema(&self) -> Result<Schema> {
        match &self.schema {
            Some(p) => Ok(Schema::from_file(p)?),
            None => Ok(Schema::default()),
        }
    }
}

/// Hashing layout used to encode loaded files (generated corpora carry their own).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingConfig {
    pub n_projections: usize,
    pub buckets_per_projection: usize,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            n_projections: 5,
            buckets_per_projection: 6,
        }
    }
}

/// Per-method override of the default hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOverride {
    /// Base-learner penalties (ridge alpha or logistic 1/C).
    pub l2: Option<Vec<f64>>,
    /// Effect-stage penalties of X, R and DR.
    pub effect_l2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparabilityConfig {
    pub test_sizes: Vec<usize>,
    pub train_fraction: f64,
    pub cv_folds: usize,
    pub bins: usize,
    pub n_bootstrap: usize,
    pub label: OutcomeLabel,
    /// Adds the true-effect scorer and a noised copy of it (synthetic data only).
    pub planted_pair: bool,
    /// Noise sd of the noised scorer, in units of the sd of the true effect.
    pub planted_noise: f64,
    /// Fit on at most this many training rows.
    pub max_train_rows: Option<usize>,
}

impl Default for SeparabilityConfig {
    fn default() -> Self {
        Self {
            test_sizes: vec![1000, 5000, 20_000],
            train_fraction: 0.8,
            cv_folds: 5,
            bins: 100,
            n_bootstrap: 1000,
            label: OutcomeLabel::Visit,
            planted_pair: true,
            planted_noise: 3.0,
            max_train_rows: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IteConfig {
    pub surfaces: Vec<SurfaceKind>,
    pub n_realizations: usize,
    pub train_fraction: f64,
    pub cv_folds: usize,
    /// Adds the true-effect scorer as a reference column.
    pub include_oracle: bool,
}

impl Default for IteConfig {
    fn default() -> Self {
        Self {
            surfaces: vec![SurfaceKind::CaseA, SurfaceKind::CaseB, SurfaceKind::MultiPeaked],
            n_realizations: 10,
            train_fraction: 0.5,
            cv_folds: 5,
            include_oracle: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub n_permutations: usize,
    /// Penalty (1/C) of the two-sample-test classifier.
    pub c2st_l2: f64,
    pub outcomes: Vec<OutcomeLabel>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            n_permutations: 99,
            c2st_l2: 1.0,
            outcomes: vec![OutcomeLabel::Visit, OutcomeLabel::Conversion],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    /// Experiment seed; replaces `generator.seed`.
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Size of the worker pool; all cores when unset.
    pub workers: Option<usize>,
    pub data: Option<DataSource>,
    pub generator: Option<GeneratorConfig>,
    pub encoding: EncodingConfig,
    pub methods: Vec<String>,
    pub grids: BTreeMap<String, GridOverride>,
    pub separability: SeparabilityConfig,
    pub ite: IteConfig,
    pub validate: ValidateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_protocol(Protocol::Validate)
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults of each protocol.
    pub fn for_protocol(protocol: Protocol) -> Self {
        let (methods, generator): (&[&str], GeneratorConfig) = match protocol {
            Protocol::Separability => (&["tm", "cvt", "mom", "sdr"], GeneratorConfig::binary_uplift()),
            Protocol::IteBenchmark => (&["t-learner", "x-learner", "r-learner", "dr-learner"], GeneratorConfig::default()),
            Protocol::Generate => (&[], GeneratorConfig::default()),
            Protocol::Validate => (&[], GeneratorConfig::binary_uplift()),
        };
        Self {
            protocol,
            seed: 0,
            output: None,
            workers: None,
            data: None,
            generator: Some(generator),
            encoding: EncodingConfig::default(),
            methods: methods.iter().map(|s| s.to_string()).collect(),
            grids: BTreeMap::new(),
            separability: SeparabilityConfig::default(),
            ite: IteConfig::default(),
            validate: ValidateConfig::default(),
        }
    }

    /// Parses an experiment file; top-level keys it omits take the defaults
    /// of its protocol.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let err = |e: &dyn std::fmt::Display| BenchError::Config(e.to_string());
        let mut table: toml::Table = s.parse().map_err(|e| err(&e))?;
        let protocol: Protocol = match table.get("protocol") {
            Some(v) => v.clone().try_into().map_err(|e| err(&e))?,
            None => return Err(BenchError::Config("missing `protocol`".into())),
        };
        let defaults = toml::Table::try_from(Self::for_protocol(protocol)).map_err(|e| err(&e))?;
        for (k, v) in defaults {
            table.entry(k).or_insert(v);
        }
        table.try_into().map_err(|e| err(&e))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| BenchError::Config(e.to_string()))
    }

    /// Generator configuration with the experiment seed applied.
    pub fn generator(&self) -> Option<GeneratorConfig> {
        self.generator.clone().map(|g| GeneratorConfig { seed: self.seed, ..g })
    }

    /// Checks method names, grids and referenced paths.
    pub fn validate(&self) -> Result<()> {
        let reg = LearnerRegistry::with_builtins();
        for m in self.methods.iter().chain(self.grids.keys()) {
            reg.get(m).map_err(|_| {
                let known: Vec<&str> = reg.names().collect();
                BenchError::Config(format!("unknown method `{m}` (known: {})", known.join(", ")))
            })?;
        }
        for (m, g) in &self.grids {
            for v in g.l2.iter().chain(&g.effect_l2).flatten() {
                if !(*v >= 0.0) {
                    return Err(BenchError::Config(format!("grid for `{m}` has negative penalty {v}")));
                }
            }
            if g.l2.as_ref().is_some_and(Vec::is_empty) || g.effect_l2.as_ref().is_some_and(Vec::is_empty) {
                return Err(BenchError::Config(format!("grid for `{m}` is empty")));
            }
        }
        if self.workers == Some(0) {
            return Err(BenchError::Config("workers must be >= 1".into()));
        }
        if let Some(d) = &self.data {
            if !d.path.exists() {
                return Err(BenchError::Data(uplift_core::Error::Io {
                    path: d.path.clone(),
                    source: std::io::ErrorKind::NotFound.into(),
                }));
            }
        }
        let needs_source = !matches!(self.protocol, Protocol::Generate | Protocol::IteBenchmark);
        if needs_source && self.data.is_none() && self.generator.is_none() {
            return Err(BenchError::Config("no data source: set [data] or [generator]".into()));
        }
        if self.protocol == Protocol::IteBenchmark && self.generator.is_none() {
            return Err(BenchError::Config("the ITE benchmark needs a [generator] section".into()));
        }
        let s = &self.separability;
        if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) || !(self.ite.train_fraction > 0.0 && self.ite.train_fraction < 1.0) {
            return Err(BenchError::Config("train_fraction must lie in (0, 1)".into()));
        }
        if s.n_bootstrap < 2 || s.bins == 0 {
            return Err(BenchError::Config("need n_bootstrap >= 2 and bins >= 1".into()));
        }
        Ok(())
    }

    /// Hyperparameter grid of `learner`: its default unless overridden.
    pub fn grid_for(&self, learner: &dyn UpliftLearner) -> Vec<LearnerConfig> {
        let default = learner.default_grid();
        let Some(ov) = self.grids.get(learner.name()) else {
            return default;
        };
        let dedup = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let l2 = ov.l2.clone().unwrap_or_else(|| dedup(default.iter().map(|c| c.l2()).collect()));
        let effect = ov
            .effect_l2
            .clone()
            .unwrap_or_else(|| dedup(default.iter().map(|c| c.effect_l2).collect()));
        let base = learner.default_config();
        l2.iter()
            .flat_map(|&a| effect.iter().map(move |&e| base.with_l2(a).with_effect_l2(e)))
            .collect()
    }
}
