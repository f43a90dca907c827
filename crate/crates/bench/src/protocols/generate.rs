//! Writes a generated corpus, its ground truth and a manifest to regenerate it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uplift_core::data::{validate_constraints, write_csv, ConstraintReport};
use uplift_core::matrix::mean;
use uplift_core::synth::{generate, AssignmentConfig, SurfaceKind};

use crate::config::{ExperimentConfig, Protocol};
use crate::error::{BenchError, Result};

pub const DATA_FILE: &str = "data.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateReport {
    pub files: Vec<PathBuf>,
    pub n: usize,
    pub seed: u64,
    pub surface: SurfaceKind,
    pub assignment: AssignmentConfig,
    pub treatment_ratio: f64,
    pub mean_tau: f64,
    pub visit_rate: f64,
    pub conversion_rate: f64,
    pub constraints: ConstraintReport,
}

impl GenerateReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "generated n={} surface={} seed={} assignment={:?}\n",
            self.n,
            self.surface.name(),
            self.seed,
            self.assignment
        );
        let _ = writeln!(
            out,
            "treatment ratio {:.4}, mean tau {:.4}, visit rate {:.4}, conversion rate {:.4}",
            self.treatment_ratio, self.mean_tau, self.visit_rate, self.conversion_rate
        );
        for f in &self.files {
            let _ = writeln!(out, "  wrote {}", f.display());
        }
        out
    }
}

/// The configuration that regenerates the same files.
pub fn manifest(config: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        protocol: Protocol::Generate,
        output: None,
        workers: None,
        data: None,
        generator: config.generator(),
        ..config.clone()
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| BenchError::output(path, e))
}

pub fn run_generate(config: &ExperimentConfig, out_dir: &Path) -> Result<GenerateReport> {
    let gen = config
        .generator()
        .ok_or_else(|| BenchError::Config("generate needs a [generator] section".into()))?;
    std::fs::create_dir_all(out_dir).map_err(|e| BenchError::output(out_dir, e))?;
    let g = generate(&gen)?;

    let data_path = out_dir.join(DATA_FILE);
    write_csv(&g.dataset, &data_path, false).map_err(|e| match e {
        uplift_core::Error::Io { path, source } => BenchError::Output { path, source },
        other => other.into(),
    })?;
    let mut truth = String::from("row,mu0,mu1,tau,propensity\n");
    let tr = &g.truth;
    for i in 0..tr.len() {
        let _ = writeln!(truth, "{i},{},{},{},{}", tr.mu0[i], tr.mu1[i], tr.tau[i], tr.propensity[i]);
    }
    let truth_path = out_dir.join(TRUTH_FILE);
    write_text(&truth_path, &truth)?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_text(&manifest_path, &manifest(config).to_toml()?)?;

    Ok(GenerateReport {
        files: vec![data_path, truth_path, manifest_path],
        n: gen.n,
        seed: gen.seed,
        surface: gen.surface,
        assignment: gen.assignment,
        treatment_ratio: g.dataset.treatment_ratio(),
        mean_tau: mean(&tr.tau),
        visit_rate: g.dataset.visit_rate(),
        conversion_rate: g.dataset.conversion_rate(),
        constraints: validate_constraints(&g.dataset),
    })
}
