//! Two-model, class-variable-transformation, modified-outcome and
//! shared-representation baselines.

use super::{
    logistic_fit, ridge_fit, BaseLearnerConfig, LearnerConfig, Method, ModelState, TrainingData, UpliftLearner,
    UpliftModel,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn model(method: Method, config: &LearnerConfig, data: &TrainingData<'_>, state: ModelState) -> UpliftModel {
    UpliftModel {
        method,
        config: *config,
        treatment_ratio: data.treatment_ratio(),
        state,
    }
}

/// Fits one response model per arm.
pub(crate) fn fit_arms(base: &BaseLearnerConfig, data: &TrainingData<'_>) -> Result<(super::BaseModel, super::BaseModel)> {
    let (treated, control) = data.arms()?;
    let fit_on = |idx: &[usize]| {
        let x = data.x.select_rows(idx);
        let y: Vec<f64> = idx.iter().map(|&i| data.y[i]).collect();
        base.fit(&x, &y, None)
    };
    Ok((fit_on(&treated)?, fit_on(&control)?))
}

fn fit_two_model(method: Method, data: &TrainingData<'_>, config: &LearnerConfig) -> Result<UpliftModel> {
    config.validate()?;
    let (treated, control) = fit_arms(&config.base, data)?;
    Ok(model(method, config, data, ModelState::TwoModel { treated, control }))
}

pub fn fit_tm(data: &TrainingData<'_>, config: &LearnerConfig) -> Result<UpliftModel> {
    fit_two_model(Method::Tm, data, config)
}

/// Same operation as [`fit_tm`] under its meta-learner name.
pub fn fit_tlearner(data: &TrainingData<'_>, config: &LearnerConfig) -> Result<UpliftModel> {
    fit_two_model(Method::TLearner, data, config)
}

/// `Z = T Y + (1 - T)(1 - Y)`.
pub fn cvt_label(t: bool, y: f64) -> f64 {
    if t {
        y
    } else {
        1.0 - y
    }
}

pub fn fit_cvt(data: &TrainingData<'_>, config: &LearnerConfig) -> Result<UpliftModel> {
    config.validate()?;
    data.require_binary()?;
    data.arms()?;
    let e = data.treatment_ratio();
    let z: Vec<f64> = data.t.iter().zip(data.y).map(|(&t, &y)| cvt_label(t, y)).collect();
    let weights: Option<Vec<f64>> = config.cvt_weighted.then(|| {
        let (w1, w0) = (1.0 / (2.0 * e), 1.0 / (2.0 * (1.0 - e)));
        data.t.iter().map(|&t| if t { w1 } else { w0 }).collect()
    });
    let classifier = logistic_fit(data.x, &z, weights.as_deref(), config.base.l2, None, config.base.gd())?;
    Ok(model(Method::Cvt, config, data, ModelState::ClassTransform { classifier }))
}

/// `Y* = Y T / e - Y (1 - T) / (1 - e)`.
pub fn transformed_outcome(y: &[f64], t: &[bool], e: f64) -> Result<Vec<f64>> {
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::DegeneratePropensity(e));
    }
    if y.len() != t.len() {
        return Err(Error::LengthMismatch(y.len(), t.len()));
    }
    Ok(y.iter()
        .zip(t)
        .map(|(&y, &t)| if t { y / e } else { -y / (1.0 - e) })
        .collect())
}

pub fn fit_mom(data: &TrainingData<'_>, config: &LearnerConfig) -> Result<UpliftModel> {
    config.validate()?;
    let ystar = transformed_outcome(data.y, data.t, data.treatment_ratio())?;
    let regression = ridge_fit(data.x, &ystar, None, config.base.l2, true)?;
    Ok(model(Method::Mom, config, data, ModelState::Effect { regression }))
}

/// `[x, t x, t]` rows.
fn sdr_design(x: &Matrix, t: &[bool]) -> Matrix {
    let d = x.cols();
    let mut data = Vec::with_capacity(x.rows() * (2 * d + 1));
    for (row, &ti) in x.iter_rows().zip(t) {
        data.extend_from_slice(row);
        if ti {
            data.extend_from_slice(row);
            data.push(1.0);
        } else {
            data.extend(std::iter::repeat_n(0.0, d + 1));
        }
    }
    Matrix::from_vec(x.rows(), 2 * d + 1, data).expect("design shape")
}

pub fn fit_sdr(data: &TrainingData<'_>, config: &LearnerConfig) -> Result<UpliftModel> {
    config.validate()?;
    data.require_binary()?;
    data.arms()?;
    let lambda = config.sdr_lambda;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("sdr_lambda must be > 0, got {lambda}")));
    }
    let d = data.x.cols();
    let design = sdr_design(data.x, data.t);
    let mut scale = vec![1.0; 2 * d + 1];
    scale[d..2 * d].iter_mut().for_each(|s| *s = 1.0 / lambda);
    scale[2 * d] = 0.0;
    let fitted = logistic_fit(&design, data.y, None, config.base.l2, Some(&scale), config.base.gd())?;
    Ok(model(Method::Sdr, config, data, ModelState::Shared { model: fitted, dims: d }))
}

/// TM and T-learner: one strategy under two names.
#[derive(Debug, Clone, Copy)]
pub struct TwoModel {
    method: Method,
}

impl TwoModel {
    pub fn new(method: Method) -> Self {
        assert!(matches!(method, Method::Tm | Method::TLearner), "two-model strategy is tm or t-learner");
        Self { method }
    }
}

impl UpliftLearner for TwoModel {
    fn method(&self) -> Method {
        self.method
    }

    fn fit(&self, data: &TrainingData<'_>, config: &LearnerConfig) -> Result<UpliftModel> {
        fit_two_model(self.method, data, config)
    }
}

macro_rules! strategy {
    ($name:ident, $method:expr, $fit:path) => {
        #[derive(Debug, Clone, Copy, Default)]
        pub struct $name;

        impl UpliftLearner for $name {
            fn method(&self) -> Method {
                $method
            }

            fn fit(&self, data: &TrainingData<'_>, config: &LearnerConfig) -> Result<UpliftModel> {
                $fit(data, config)
            }
        }
    };
}
pub(crate) use strategy;

strategy!(Cvt, Method::Cvt, fit_cvt);
strategy!(Mom, Method::Mom, fit_mom);
strategy!(Sdr, Method::Sdr, fit_sdr);
