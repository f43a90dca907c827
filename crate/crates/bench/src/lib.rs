//! Experiment orchestration on top of `uplift-core`: configuration files,
//! the separability, ITE, generation and validation protocols, and reports.

pub mod config;
pub mod error;
pub mod protocols;
pub mod report;
pub mod source;

pub use config::{ExperimentConfig, Protocol};
pub use error::{BenchError, Result};
pub use report::{EvaluationReport, Meta, ReportBody};

use crate::protocols::{run_generate, run_ite_benchmark, run_separability, run_validate};

/// Validates `config`, runs its protocol on a pool of `config.workers`
/// threads and writes the outputs when `config.output` is set.
pub fn run(config: &ExperimentConfig) -> Result<EvaluationReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| BenchError::Experiment(e.to_string()))?;
    let workers = pool.current_num_threads();
    let body = pool.install(|| -> Result<ReportBody> {
        Ok(match config.protocol {
            Protocol::Separability => ReportBody::Separability(run_separability(config)?),
            Protocol::IteBenchmark => ReportBody::IteBenchmark(run_ite_benchmark(config)?),
            Protocol::Validate => ReportBody::Validate(run_validate(config)?),
            Protocol::Generate => {
                let out = config
                    .output
                    .as_deref()
                    .ok_or_else(|| BenchError::Usage("generate needs an output directory (--out)".into()))?;
                ReportBody::Generate(run_generate(config, out)?)
            }
        })
    })?;
    let report = EvaluationReport {
        meta: Meta::now(config.seed, workers),
        config: config.clone(),
        body,
    };
    if let Some(dir) = &config.output {
        report.write(dir)?;
    }
    Ok(report)
}
