//! Base learners and the uplift / meta-learner baselines.
//!
//! Every baseline implements [`UpliftLearner`] and is registered by name in a
//! [`LearnerRegistry`]; fitting returns an [`UpliftModel`], a plain data
//! structure that scores rows and serializes to JSON.

mod logistic;
mod meta;
mod ridge;
mod tune;
mod uplift;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use logistic::{log_loss, logistic_fit, minimize, GdOptions, LogisticModel, LogisticObjective};
pub use meta::{
    dr_pseudo_outcome, fit_drlearner, fit_rlearner, fit_xlearner, r_pseudo_outcome, DrLearner, RLearner,
    XLearner,
};
pub use ridge::{ridge_fit, RidgeModel};
pub use tune::{tune, CvObjective, CvRow, TuneResult};
pub use uplift::{
    cvt_label, fit_cvt, fit_mom, fit_sdr, fit_tlearner, fit_tm, transformed_outcome, Cvt, Mom, Sdr, TwoModel,
};

use crate::error::{Error, Result};
use crate::matrix::{dot, sigmoid, Matrix};
use crate::synth::Surface;

/// Lower clip of every estimated propensity used as a denominator.
pub const PROPENSITY_CLIP: f64 = 0.01;

pub fn clip_propensity(p: f64) -> f64 {
    p.clamp(PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)
}

/// Logistic grid `C in {1e0, 1e2, 1e4, 1e6, 1e8}` expressed as `l2 = 1 / C`.
pub const LOGISTIC_L2_GRID: [f64; 5] = [1.0, 1e-2, 1e-4, 1e-6, 1e-8];
/// Ridge grid `alpha in {1e-8, 1e-6, 1e-4, 1e-2, 1e0}`.
pub const RIDGE_L2_GRID: [f64; 5] = [1e-8, 1e-6, 1e-4, 1e-2, 1.0];
/// Penalties of the final effect regression of X, R and DR. Their
/// pseudo-outcomes are far noisier than the raw outcomes, so the useful range
/// sits well above the base-learner grid.
pub const EFFECT_L2_GRID: [f64; 4] = [1.0, 1e2, 1e4, 1e6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseKind {
    Ridge,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseLearnerConfig {
    pub kind: BaseKind,
    /// Ridge alpha, or `1 / C` for logistic regression.
    pub l2: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for BaseLearnerConfig {
    fn default() -> Self {
        Self::ridge(1.0)
    }
}

impl BaseLearnerConfig {
    pub fn ridge(l2: f64) -> Self {
        Self {
            kind: BaseKind::Ridge,
            l2,
            max_iters: 500,
            tol: 1e-6,
            seed: 0,
        }
    }

    pub fn logistic(l2: f64) -> Self {
        Self {
            kind: BaseKind::Logistic,
            ..Self::ridge(l2)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("l2 must be >= 0, got {}", self.l2)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }

    pub fn gd(&self) -> GdOptions {
        GdOptions {
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[f64], weights: Option<&[f64]>) -> Result<BaseModel> {
        self.validate()?;
        Ok(match self.kind {
            BaseKind::Ridge => BaseModel::Ridge(ridge_fit(x, y, weights, self.l2, true)?),
            BaseKind::Logistic => BaseModel::Logistic(logistic_fit(x, y, weights, self.l2, None, self.gd())?),
        })
    }
}

/// A fitted response model: raw predictions for ridge, probabilities for
/// logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseModel {
    Ridge(RidgeModel),
    Logistic(LogisticModel),
}

impl BaseModel {
    #[inline]
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            BaseModel::Ridge(m) => m.predict_row(x),
            BaseModel::Logistic(m) => m.predict_row(x),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Tm,
    Cvt,
    Mom,
    Sdr,
    TLearner,
    XLearner,
    RLearner,
    DrLearner,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Tm,
        Method::Cvt,
        Method::Mom,
        Method::Sdr,
        Method::TLearner,
        Method::XLearner,
        Method::RLearner,
        Method::DrLearner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tm => "tm",
            Method::Cvt => "cvt",
            Method::Mom => "mom",
            Method::Sdr => "sdr",
            Method::TLearner => "t-learner",
            Method::XLearner => "x-learner",
            Method::RLearner => "r-learner",
            Method::DrLearner => "dr-learner",
        }
    }

    /// Methods ending in a regression on imputed or pseudo-outcomes.
    pub fn has_effect_stage(self) -> bool {
        matches!(self, Method::XLearner | Method::RLearner | Method::DrLearner)
    }

    /// Uplift-modeling baselines need binary outcomes.
    pub fn needs_binary_outcome(self) -> bool {
        matches!(self, Method::Cvt | Method::Sdr)
    }
}

/// Hyperparameters of any baseline. Fields a method does not use are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    /// Response model(s): TM/T arms, CVT/SDR classifier, MOM regression,
    /// first stage of X, outcome nuisance of R and DR.
    pub base: BaseLearnerConfig,
    /// Propensity model of X, R and DR (always logistic).
    pub propensity: BaseLearnerConfig,
    /// Ridge penalty of the effect regressions of X, R and DR.
    pub effect_l2: f64,
    /// SDR: larger values free the treatment-interaction block.
    pub sdr_lambda: f64,
    /// CVT: inverse-propensity class weights.
    pub cvt_weighted: bool,
    /// X-learner: weight by the constant treated fraction instead of a
    /// fitted propensity model.
    pub constant_propensity: bool,
    pub cross_fit_folds: usize,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            base: BaseLearnerConfig::ridge(1.0),
            propensity: BaseLearnerConfig::logistic(1.0),
            effect_l2: 1.0,
            sdr_lambda: 1.0,
            cvt_weighted: true,
            constant_propensity: false,
            cross_fit_folds: 2,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    /// Default configuration for `method`: logistic response models for the
    /// classification-based baselines, ridge otherwise.
    pub fn for_method(method: Method) -> Self {
        let base = match method {
            Method::Tm | Method::Cvt | Method::Sdr => BaseLearnerConfig::logistic(1.0),
            _ => BaseLearnerConfig::ridge(1.0),
        };
        Self { base, ..Self::default() }
    }

    /// Sets the base-learner penalty.
    pub fn with_l2(mut self, l2: f64) -> Self {
        self.base.l2 = l2;
        self
    }

    pub fn with_effect_l2(mut self, l2: f64) -> Self {
        self.effect_l2 = l2;
        self
    }

    pub fn l2(&self) -> f64 {
        self.base.l2
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.propensity.validate()?;
        if !(self.effect_l2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("effect_l2 must be >= 0, got {}", self.effect_l2)));
        }
        Ok(())
    }
}

/// Training rows: encoded features, outcome and treatment flags.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub x: &'a Matrix,
    pub y: &'a [f64],
    pub t: &'a [bool],
}

impl<'a> TrainingData<'a> {
    pub fn new(x: &'a Matrix, y: &'a [f64], t: &'a [bool]) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::LengthMismatch(y.len(), x.rows()));
        }
        if t.len() != x.rows() {
            return Err(Error::LengthMismatch(t.len(), x.rows()));
        }
        Ok(Self { x, y, t })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn treatment_ratio(&self) -> f64 {
        self.t.iter().filter(|&&b| b).count() as f64 / self.len() as f64
    }

    /// Row indices of the treated and control arms; errors if either is empty.
    pub fn arms(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let (treated, control): (Vec<usize>, Vec<usize>) = (0..self.len()).partition(|&i| self.t[i]);
        if treated.is_empty() {
            return Err(Error::EmptyArm("treated"));
        }
        if control.is_empty() {
            return Err(Error::EmptyArm("control"));
        }
        Ok((treated, control))
    }

    pub fn require_binary(&self) -> Result<()> {
        match self.y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            Some(&v) => Err(Error::NonBinary(v)),
            None => Ok(()),
        }
    }

    pub fn treatment_labels(&self) -> Vec<f64> {
        self.t.iter().map(|&b| f64::from(u8::from(b))).collect()
    }
}

/// Anything that predicts an individual effect from an encoded row.
pub trait UpliftScorer: Send + Sync {
    fn score(&self, x: &[f64]) -> f64;

    fn score_matrix(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.score(r)).collect()
    }
}

/// The true effect of a response surface; NaN where it overflows.
impl UpliftScorer for Surface {
    fn score(&self, x: &[f64]) -> f64 {
        self.eval_row(x).map_or(f64::NAN, |(m0, m1)| m1 - m0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PropensityModel {
    Constant { value: f64 },
    Logistic(LogisticModel),
}

impl PropensityModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            PropensityModel::Constant { value } => *value,
            PropensityModel::Logistic(m) => m.predict_row(x),
        }
    }
}

/// Fitted parameter blocks of each family of baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelState {
    /// `m1(x) - m0(x)`.
    TwoModel { treated: BaseModel, control: BaseModel },
    /// `2 g(x) - 1`.
    ClassTransform { classifier: LogisticModel },
    /// Direct regression of a pseudo-outcome (MOM, R- and DR-learner).
    Effect { regression: RidgeModel },
    /// Logistic model on `[x, t x, t]`; scores `m([x, x, 1]) - m([x, 0, 0])`.
    Shared { model: LogisticModel, dims: usize },
    /// `g(x) tau0(x) + (1 - g(x)) tau1(x)`.
    Cross {
        effect_treated: RidgeModel,
        effect_control: RidgeModel,
        propensity: PropensityModel,
    },
}

/// A fitted baseline. Scoring is a pure function of the stored state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftModel {
    pub method: Method,
    pub config: LearnerConfig,
    /// Treated fraction of the training rows.
    pub treatment_ratio: f64,
    pub state: ModelState,
}

impl UpliftModel {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serde(e.to_string()))
    }
}

impl UpliftScorer for UpliftModel {
    fn score(&self, x: &[f64]) -> f64 {
        match &self.state {
            ModelState::TwoModel { treated, control } => treated.predict_row(x) - control.predict_row(x),
            ModelState::ClassTransform { classifier } => 2.0 * classifier.predict_row(x) - 1.0,
            ModelState::Effect { regression } => regression.predict_row(x),
            ModelState::Shared { model, dims } => {
                let d = *dims;
                let w = &model.coef;
                let shared = dot(x, &w[..d]) + model.intercept;
                let treated = shared + dot(x, &w[d..2 * d]) + w[2 * d];
                sigmoid(treated) - sigmoid(shared)
            }
            ModelState::Cross {
                effect_treated,
                effect_control,
                propensity,
            } => {
                let g = propensity.predict_row(x);
                g * effect_control.predict_row(x) + (1.0 - g) * effect_treated.predict_row(x)
            }
        }
    }
}

/// A fitting strategy selectable by name.
pub trait UpliftLearner: Send + Sync {
    fn method(&self) -> Method;

    fn name(&self) -> &'static str {
        self.method().name()
    }

    fn fit(&self, data: &TrainingData<'_>, config: &LearnerConfig) -> Result<UpliftModel>;

    fn default_config(&self) -> LearnerConfig {
        LearnerConfig::for_method(self.method())
    }

    /// Default hyperparameter grid: the logistic `C` grid for
    /// classification-based response models, the ridge grid otherwise,
    /// crossed with [`EFFECT_L2_GRID`] for methods with an effect stage.
    fn default_grid(&self) -> Vec<LearnerConfig> {
        let base = self.default_config();
        let grid: &[f64] = match base.base.kind {
            BaseKind::Logistic => &LOGISTIC_L2_GRID,
            BaseKind::Ridge => &RIDGE_L2_GRID,
        };
        let effect: &[f64] = if self.method().has_effect_stage() {
            &EFFECT_L2_GRID
        } else {
            &[1.0]
        };
        grid.iter()
            .flat_map(|&l2| effect.iter().map(move |&e| base.with_l2(l2).with_effect_l2(e)))
            .collect()
    }
}

/// Name-keyed collection of fitting strategies.
#[derive(Clone)]
pub struct LearnerRegistry {
    learners: BTreeMap<String, Arc<dyn UpliftLearner>>,
}

impl Default for LearnerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl LearnerRegistry {
    pub fn empty() -> Self {
        Self {
            learners: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(TwoModel::new(Method::Tm));
        reg.register(TwoModel::new(Method::TLearner));
        reg.register(Cvt);
        reg.register(Mom);
        reg.register(Sdr);
        reg.register(XLearner);
        reg.register(RLearner);
        reg.register(DrLearner);
        reg
    }

    pub fn register<L: UpliftLearner + 'static>(&mut self, learner: L) {
        self.learners.insert(learner.name().to_string(), Arc::new(learner));
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn UpliftLearner>> {
        self.learners
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.learners.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_resolves_every_method() {
        let reg = LearnerRegistry::with_builtins();
        for m in Method::ALL {
            assert_eq!(reg.get(m.name()).unwrap().method(), m);
        }
        assert!(matches!(reg.get("tarnet"), Err(Error::UnknownMethod(_))));
        assert_eq!(reg.names().count(), 8);
    }

    #[test]
    fn json_round_trip_reproduces_scores() {
        use crate::rng::stream_rng;
        use rand::Rng as _;
        let n = 300;
        let mut rng = stream_rng(8, 0);
        let x = Matrix::from_vec(n, 3, (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let t: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let y: Vec<f64> = x
            .iter_rows()
            .zip(&t)
            .map(|(r, &ti)| f64::from(u8::from(r[0] + if ti { r[1] } else { 0.0 } > rng.random_range(-1.0..1.0))))
            .collect();
        let data = TrainingData::new(&x, &y, &t).unwrap();
        let reg = LearnerRegistry::with_builtins();
        for name in reg.names() {
            let learner = reg.get(name).unwrap();
            let cfg = learner.default_config();
            let model = learner.fit(&data, &cfg).unwrap();
            let again = learner.fit(&data, &cfg).unwrap();
            let scores = model.score_matrix(&x);
            assert_eq!(scores, again.score_matrix(&x), "{name} not deterministic");
            let loaded = UpliftModel::from_json(&model.to_json().unwrap()).unwrap();
            assert_eq!(loaded.score_matrix(&x), scores, "{name} round trip");
        }
    }

    #[test]
    fn oracle_scorer_is_true_effect() {
        let s = Surface::CaseA { beta: vec![1.0, 2.0], effect: 4.0 };
        assert_eq!(s.score(&[0.3, -1.0]), 4.0);
    }

    #[test]
    fn default_grids() {
        let reg = LearnerRegistry::with_builtins();
        let c: Vec<f64> = reg.get("tm").unwrap().default_grid().iter().map(|c| 1.0 / c.l2()).collect();
        assert_eq!(c, vec![1e0, 1e2, 1e4, 1e6, 1e8]);
        let a: Vec<f64> = reg.get("t-learner").unwrap().default_grid().iter().map(|c| c.l2()).collect();
        assert_eq!(a, vec![1e-8, 1e-6, 1e-4, 1e-2, 1e0]);
        let dr = reg.get("dr-learner").unwrap().default_grid();
        assert_eq!(dr.len(), 20);
        assert!(dr.iter().any(|c| c.l2() == 1e-8 && c.effect_l2 == 1e6));
    }
}
