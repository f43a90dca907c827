//! Building blocks for benchmarking uplift models and individual treatment
//! effect (ITE) estimators.
//!
//! - [`data`]: the per-user sample schema, CSV ingestion, categorical
//!   encoding, stratified splitting and rebalancing of incrementality tests.
//! - [`synth`]: semi-synthetic generation of covariates, treatment assignment,
//!   response surfaces and outcomes with known ground truth.
//! - [`learners`]: ridge and logistic base learners plus the uplift and
//!   meta-learner baselines, registered by name behind [`learners::UpliftLearner`].
//! - [`metrics`]: uplift curve, AUUC with bootstrap intervals, PEHE, policy
//!   risk and ATE estimators.
//! - [`validation`]: classifier two-sample test and informativeness checks.

pub mod data;
pub mod error;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod rng;
pub mod synth;
pub mod validation;

pub use error::{Error, Result};
pub use matrix::Matrix;
