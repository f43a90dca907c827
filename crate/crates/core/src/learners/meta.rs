//! X-, R- and DR-learners.

use super::uplift::{fit_arms, strategy};
use super::{
    clip_propensity, ridge_fit, LearnerConfig, Method, ModelState, PropensityModel, TrainingData, UpliftLearner,
    UpliftModel,
};
use crate::data::kfold_keys;
use crate::error::{Error, Result};

/// Rows with an R-loss weight below this are dropped.
const MIN_R_WEIGHT: f64 = 1e-12;

fn model(method: Method, config: &LearnerConfig, data: &TrainingData<'_>, state: ModelState) -> UpliftModel {
    UpliftModel {
        method,
        config: *config,
        treatment_ratio: data.treatment_ratio(),
        state,
    }
}

fn fit_propensity(data: &TrainingData<'_>, config: &LearnerConfig) -> Result<super::BaseModel> {
    let mut cfg = config.propensity;
    cfg.kind = super::BaseKind::Logistic;
    cfg.fit(data.x, &data.treatment_labels(), None)
}

pub fn fit_xlearner(data: &TrainingData<'_>, config: &LearnerConfig) -> Result<UpliftModel> {
    config.validate()?;
    let (treated, control) = data.arms()?;
    let (mu1, mu0) = fit_arms(&config.base, data)?;

    let xt = data.x.select_rows(&treated);
    let d1: Vec<f64> = treated
        .iter()
        .zip(xt.iter_rows())
        .map(|(&i, r)| data.y[i] - mu0.predict_row(r))
        .collect();
    let xc = data.x.select_rows(&control);
    let d0: Vec<f64> = control
        .iter()
        .zip(xc.iter_rows())
        .map(|(&i, r)| mu1.predict_row(r) - data.y[i])
        .collect();
    let effect_treated = ridge_fit(&xt, &d1, None, config.effect_l2, true)?;
    let effect_control = ridge_fit(&xc, &d0, None, config.effect_l2, true)?;

    let propensity = if config.constant_propensity {
        PropensityModel::Constant {
            value: data.treatment_ratio(),
        }
    } else {
        match fit_propensity(data, config)? {
            super::BaseModel::Logistic(m) => PropensityModel::Logistic(m),
            super::BaseModel::Ridge(_) => unreachable!("propensity model is logistic"),
        }
    };
    Ok(model(
        Method::XLearner,
        config,
        data,
        ModelState::Cross {
            effect_treated,
            effect_control,
            propensity,
        },
    ))
}

/// R-loss pseudo-outcomes `(y - m) / (t - e)` and weights `(t - e)^2`, with
/// `e` clipped to `[0.01, 0.99]`.
pub fn r_pseudo_outcome(y: &[f64], t: &[bool], m: &[f64], e: &[f64]) -> (Vec<f64>, Vec<f64>) {
    y.iter()
        .zip(t)
        .zip(m.iter().zip(e))
        .map(|((&y, &t), (&m, &e))| {
            let r = f64::from(u8::from(t)) - clip_propensity(e);
            ((y - m) / r, r * r)
        })
        .unzip()
}

/// Rows whose R-loss weight is usable; errors when none is.
fn identified_rows(weights: &[f64]) -> Result<Vec<usize>> {
    let keep: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] >= MIN_R_WEIGHT).collect();
    if keep.is_empty() {
        return Err(Error::NoIdentification);
    }
    Ok(keep)
}

/// Doubly robust pseudo-outcome, with `e` clipped to `[0.01, 0.99]`.
pub fn dr_pseudo_outcome(y: f64, t: bool, mu0: f64, mu1: f64, e: f64) -> f64 {
    let e = clip_propensity(e);
    if t {
        mu1 - mu0 + (y - mu1) / e
    } else {
        mu1 - mu0 - (y - mu0) / (1.0 - e)
    }
}

/// Runs `f` on each cross-fitting fold (stratified on treatment) and scatters
/// its per-row outputs for the held-out rows back into row order.
fn cross_fit<const N: usize>(
    data: &TrainingData<'_>,
    config: &LearnerConfig,
    f: impl Fn(&TrainingData<'_>, &crate::Matrix) -> Result<[Vec<f64>; N]>,
) -> Result<[Vec<f64>; N]> {
    let keys: Vec<u32> = data.t.iter().map(|&b| u32::from(b)).collect();
    let folds = kfold_keys(&keys, config.cross_fit_folds, config.seed, |k| {
        if k == 1 { "treated" } else { "control" }.to_string()
    })?;
    let mut out: [Vec<f64>; N] = std::array::from_fn(|_| vec![f64::NAN; data.len()]);
    for (train, val) in folds {
        let x = data.x.select_rows(&train);
        let y: Vec<f64> = train.iter().map(|&i| data.y[i]).collect();
        let t: Vec<bool> = train.iter().map(|&i| data.t[i]).collect();
        let fold = TrainingData::new(&x, &y, &t)?;
        let preds = f(&fold, &data.x.select_rows(&val))?;
        for (col, p) in out.iter_mut().zip(preds) {
            for (&i, v) in val.iter().zip(p) {
                col[i] = v;
            }
        }
    }
    Ok(out)
}

pub fn fit_rlearner(data: &TrainingData<'_>, config: &LearnerConfig) -> Result<UpliftModel> {
    config.validate()?;
    data.arms()?;
    let [m, e] = cross_fit(data, config, |fold, xv| {
        let outcome = config.base.fit(fold.x, fold.y, None)?;
        let prop = fit_propensity(fold, config)?;
        Ok([outcome.predict(xv), prop.predict(xv)])
    })?;
    let (pseudo, weights) = r_pseudo_outcome(data.y, data.t, &m, &e);
    let keep = identified_rows(&weights)?;
    let x = data.x.select_rows(&keep);
    let p: Vec<f64> = keep.iter().map(|&i| pseudo[i]).collect();
    let w: Vec<f64> = keep.iter().map(|&i| weights[i]).collect();
    let regression = ridge_fit(&x, &p, Some(&w), config.effect_l2, true)?;
    Ok(model(Method::RLearner, config, data, ModelState::Effect { regression }))
}

pub fn fit_drlearner(data: &TrainingData<'_>, config: &LearnerConfig) -> Result<UpliftModel> {
    config.validate()?;
    data.arms()?;
    let [mu0, mu1, e] = cross_fit(data, config, |fold, xv| {
        let (m1, m0) = fit_arms(&config.base, fold)?;
        let prop = fit_propensity(fold, config)?;
        Ok([m0.predict(xv), m1.predict(xv), prop.predict(xv)])
    })?;
    let phi: Vec<f64> = (0..data.len())
        .map(|i| dr_pseudo_outcome(data.y[i], data.t[i], mu0[i], mu1[i], e[i]))
        .collect();
    let regression = ridge_fit(data.x, &phi, None, config.effect_l2, true)?;
    Ok(model(Method::DrLearner, config, data, ModelState::Effect { regression }))
}

strategy!(XLearner, Method::XLearner, fit_xlearner);
strategy!(RLearner, Method::RLearner, fit_rlearner);
strategy!(DrLearner, Method::DrLearner, fit_drlearner);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{RidgeModel, UpliftScorer};
    use crate::matrix::{mean, variance};
    use crate::rng::stream_rng;
    use crate::Matrix;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn linear_data(n: usize, seed: u64, noise: f64) -> (Matrix, Vec<f64>, Vec<bool>) {
        let mut rng = stream_rng(seed, 0);
        let x = Matrix::from_vec(n, 3, (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let t: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let y = x
            .iter_rows()
            .zip(&t)
            .map(|(r, &ti)| {
                let e: f64 = StandardNormal.sample(&mut rng);
                r[0] + 2.0 * r[1] - r[2] + if ti { 4.0 } else { 0.0 } + noise * e
            })
            .collect();
        (x, y, t)
    }

    #[test]
    fn dr_pseudo_outcome_by_hand() {
        assert!((dr_pseudo_outcome(1.0, true, 0.2, 0.6, 0.5) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn r_pseudo_outcome_recovers_constant_effect() {
        let tau0 = 1.7;
        let e = [0.3, 0.6, 0.5, 0.9];
        let t = [true, false, true, false];
        let base = [0.5, -1.0, 2.0, 0.0];
        // y = b(x) + t tau0 and m = b(x) + e tau0
        let y: Vec<f64> = (0..4).map(|i| base[i] + if t[i] { tau0 } else { 0.0 }).collect();
        let m: Vec<f64> = (0..4).map(|i| base[i] + e[i] * tau0).collect();
        let (p, w) = r_pseudo_outcome(&y, &t, &m, &e);
        for (pi, wi) in p.iter().zip(&w) {
            assert!((pi - tau0).abs() < 1e-12);
            assert!(*wi > 0.0);
        }
        let x = Matrix::from_vec(4, 1, vec![0.1, 0.7, -0.3, 1.2]).unwrap();
        let fit = ridge_fit(&x, &p, Some(&w), 1e-6, true).unwrap();
        assert!((fit.predict_row(&[0.4]) - tau0).abs() < 1e-6);
    }

    #[test]
    fn zero_weight_rows_are_excluded() {
        assert_eq!(identified_rows(&[0.25, 0.0, 1e-13, 0.04]).unwrap(), vec![0, 3]);
        assert!(matches!(identified_rows(&[0.0, 0.0]), Err(Error::NoIdentification)));
        // with clipping the smallest reachable weight is 0.01^2
        let (_, w) = r_pseudo_outcome(&[1.0], &[true], &[0.0], &[1.0]);
        assert!((w[0] - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn propensities_in_denominators_are_clipped() {
        // e = 0 would divide by zero without the clip
        let phi = dr_pseudo_outcome(1.0, true, 0.0, 0.0, 0.0);
        assert!((phi - 100.0).abs() < 1e-9);
        let phi = dr_pseudo_outcome(1.0, false, 0.0, 0.0, 1.0);
        assert!((phi + 100.0).abs() < 1e-9);
    }

    #[test]
    fn dr_mean_tracks_ate_with_exact_nuisances() {
        let n = 100_000;
        let mut rng = stream_rng(11, 0);
        let mut phi = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.random_range(-1.0..1.0);
            let t = rng.random_bool(0.5);
            let (m0, m1) = (x, x + 2.0 + x);
            let noise: f64 = StandardNormal.sample(&mut rng);
            let y = if t { m1 } else { m0 } + noise;
            phi.push(dr_pseudo_outcome(y, t, m0, m1, 0.5));
        }
        let se = (variance(&phi) / n as f64).sqrt();
        assert!((mean(&phi) - 2.0).abs() < 3.0 * se, "{} ± {se}", mean(&phi));
    }

    #[test]
    fn xlearner_noiseless_constant_effect() {
        let (x, y, t) = linear_data(500, 1, 0.0);
        let data = TrainingData::new(&x, &y, &t).unwrap();
        let m = fit_xlearner(&data, &LearnerConfig::default().with_l2(1e-8)).unwrap();
        for s in m.score_matrix(&x) {
            assert!((s - 4.0).abs() < 1e-5, "{s}");
        }
    }

    #[test]
    fn xlearner_with_zero_propensity_is_treated_effect_model() {
        let et = RidgeModel { coef: vec![1.0, 0.0], intercept: 0.5 };
        let m = UpliftModel {
            method: Method::XLearner,
            config: LearnerConfig::default(),
            treatment_ratio: 0.5,
            state: ModelState::Cross {
                effect_treated: et.clone(),
                effect_control: RidgeModel { coef: vec![9.0, 9.0], intercept: 9.0 },
                propensity: PropensityModel::Constant { value: 0.0 },
            },
        };
        let x = [0.3, -2.0];
        assert_eq!(m.score(&x), et.predict_row(&x));
    }

    #[test]
    fn r_and_dr_recover_constant_effect() {
        let (x, y, t) = linear_data(4000, 2, 0.5);
        let data = TrainingData::new(&x, &y, &t).unwrap();
        let cfg = LearnerConfig::default().with_l2(1e-4);
        for fit in [fit_rlearner, fit_drlearner] {
            let m = fit(&data, &cfg).unwrap();
            let s = m.score_matrix(&x);
            let err = s.iter().map(|v| (v - 4.0).powi(2)).sum::<f64>() / s.len() as f64;
            assert!(err.sqrt() < 0.15, "{:?}: {}", m.method, err.sqrt());
        }
    }

    #[test]
    fn cross_fitting_needs_rows_in_each_arm() {
        let x = Matrix::zeros(3, 1);
        let data = TrainingData::new(&x, &[0.0, 1.0, 0.0], &[true, false, false]).unwrap();
        assert!(matches!(
            fit_drlearner(&data, &LearnerConfig::default()),
            Err(Error::UndersizedStratum { .. })
        ));
    }
}
