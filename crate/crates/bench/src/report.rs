use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::protocols::{GenerateReport, IteReport, SeparabilityReport, ValidateReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub seed: u64,
    /// Seconds since the Unix epoch; the only field that differs between reruns.
    pub timestamp: u64,
    pub workers: usize,
}

impl Meta {
    pub fn now(seed: u64, workers: usize) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            workers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "kebab-case")]
pub enum ReportBody {
    Separability(SeparabilityReport),
    IteBenchmark(IteReport),
    Generate(GenerateReport),
    Validate(ValidateReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub meta: Meta,
    pub config: ExperimentConfig,
    pub body: ReportBody,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| BenchError::Experiment(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| BenchError::Experiment(e.to_string()))
    }

    pub fn render(&self) -> String {
        match &self.body {
            ReportBody::Separability(r) => r.render(),
            ReportBody::IteBenchmark(r) => r.render(),
            ReportBody::Generate(r) => r.render(),
            ReportBody::Validate(r) => r.render(),
        }
    }

    /// Plottable tables of the body, by file name.
    pub fn csv_tables(&self) -> Vec<(&'static str, String)> {
        match &self.body {
            ReportBody::Separability(r) => vec![("separability.csv", r.csv())],
            ReportBody::IteBenchmark(r) => vec![("ite.csv", r.csv())],
            _ => Vec::new(),
        }
    }

    /// Writes `report.json`, `report.txt` and the CSV tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::output(dir, e))?;
        let mut files = vec![
            ("report.json", self.to_json()?),
            ("report.txt", self.render()),
        ];
        files.extend(self.csv_tables());
        files
            .into_iter()
            .map(|(name, text)| {
                let path = dir.join(name);
                std::fs::write(&path, text).map_err(|e| BenchError::output(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}
