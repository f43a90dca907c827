mod generate;
mod ite;
mod separability;
mod validate;

pub use generate::{manifest, run_generate, GenerateReport, DATA_FILE, MANIFEST_FILE, TRUTH_FILE};
pub use ite::{run_ite_benchmark, IteCell, IteReport, IteSummary};
pub use separability::{
    run_separability, AuucCell, PlantedPair, SeparabilityReport, SizeSummary, TunedMethod, NOISED_ORACLE, ORACLE,
};
pub use validate::{run_validate, CorpusReference, OutcomeCheck, ValidateReport, REFERENCE};

/// Seed streams of the experiment seed (or of a realization seed).
pub(crate) mod streams {
    pub const SPLIT: u64 = 101;
    pub const TEST_ORDER: u64 = 102;
    pub const TRAIN_SUBSAMPLE: u64 = 103;
    pub const CV: u64 = 104;
    pub const PLANTED_NOISE: u64 = 105;
    pub const BOOTSTRAP: u64 = 106;
    pub const C2ST: u64 = 107;
    pub const DUMMY: u64 = 108;
}

pub(crate) fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.digits$}"))
}

pub(crate) fn sample_std(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}
