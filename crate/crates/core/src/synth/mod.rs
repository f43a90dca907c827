//! Semi-synthetic corpora with known potential outcomes: covariates,
//! treatment assignment, response surfaces and outcome sampling.

mod assignment;
mod covariates;
mod generate;
mod outcomes;
mod surface;

pub use assignment::{assign_treatment, confounded_propensity, AssignmentMode, AssignmentSpec};
pub use covariates::{gen_covariates, CARDINALITIES, CONTINUOUS_CORRELATION, ZIPF_EXPONENT};
pub use generate::{
    generate, generate_ite_dataset, most_important_column, AssignmentConfig, Generated, GeneratorConfig,
    OutcomeMode,
};
pub use outcomes::{sample_binary_outcomes, sample_outcomes, GroundTruth};
pub use surface::{
    calibrate, eval_surface, sample_linear, sample_multi_peaked, BetaSupport, Surface, SurfaceKind,
    TARGET_EFFECT,
};
