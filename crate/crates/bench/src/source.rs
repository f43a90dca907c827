use log::info;
use uplift_core::data::{encode, load_csv_with_schema, Dataset};
use uplift_core::synth::{generate, GroundTruth};
use uplift_core::Matrix;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};

/// A loaded or generated corpus with its design matrix.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub dataset: Dataset,
    pub x: Matrix,
    /// Known only for generated corpora.
    pub truth: Option<GroundTruth>,
    pub origin: String,
}

/// The `[data]` file when configured, otherwise the generator.
pub fn load_corpus(config: &ExperimentConfig) -> Result<Corpus> {
    if let Some(src) = &config.data {
        let schema = src.schema()?;
        let dataset = load_csv_with_schema(&src.path, src.gzip(), &schema)?;
        info!("loaded {} rows from {}", dataset.len(), src.path.display());
        let enc = &config.encoding;
        let encoded = encode(&dataset, enc.n_projections, enc.buckets_per_projection, config.seed)?;
        return Ok(Corpus {
            dataset,
            x: encoded.matrix,
            truth: None,
            origin: src.path.display().to_string(),
        });
    }
    let gen = config
        .generator()
        .ok_or_else(|| BenchError::Config("no data source: set [data] or [generator]".into()))?;
    let g = generate(&gen)?;
    info!("generated {} rows ({} surface)", g.dataset.len(), gen.surface.name());
    Ok(Corpus {
        dataset: g.dataset,
        x: g.encoded.matrix,
        truth: Some(g.truth),
        origin: format!("generator:{}:seed={}", gen.surface.name(), gen.seed),
    })
}
