use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, sigmoid, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticModel {
    #[inline]
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(dot(x, &self.coef) + self.intercept)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

/// Penalized, optionally weighted log-loss:
/// `(1/n) sum_i s_i logloss_i + (l2 / 2n) sum_j pen_j w_j^2`.
/// The intercept is the last parameter and is never penalized.
pub struct LogisticObjective<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    weights: Option<&'a [f64]>,
    penalty: Vec<f64>,
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: &'a Matrix, y: &'a [f64], weights: Option<&'a [f64]>, l2: f64, penalty_scale: Option<&[f64]>) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        if n == 0 {
            return Err(Error::InvalidArgument("logistic fit on zero rows".into()));
        }
        if y.len() != n {
            return Err(Error::LengthMismatch(y.len(), n));
        }
        if let Some(&bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::NonBinary(bad));
        }
        if let Some(w) = weights {
            if w.len() != n {
                return Err(Error::LengthMismatch(w.len(), n));
            }
        }
        if !(l2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("l2 must be >= 0, got {l2}")));
        }
        let penalty = match penalty_scale {
            Some(p) if p.len() != d => return Err(Error::LengthMismatch(p.len(), d)),
            Some(p) => p.iter().map(|s| s * l2 / n as f64).collect(),
            None => vec![l2 / n as f64; d],
        };
        Ok(Self { x, y, weights, penalty })
    }

    pub fn n_params(&self) -> usize {
        self.x.cols() + 1
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let d = self.x.cols();
        let (w, b) = (&params[..d], params[d]);
        let mut total = 0.0;
        for (i, row) in self.x.iter_rows().enumerate() {
            let z = dot(row, w) + b;
            let s = self.weights.map_or(1.0, |ws| ws[i]);
            total += s * (softplus(z) - self.y[i] * z);
        }
        let reg: f64 = w.iter().zip(&self.penalty).map(|(wj, p)| 0.5 * p * wj * wj).sum();
        total / self.x.rows() as f64 + reg
    }

    /// Loss and gradient at `params`; the gradient is written into `grad`.
    pub fn loss_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.x.cols();
        let n = self.x.rows() as f64;
        let (w, b) = (&params[..d], params[d]);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (i, row) in self.x.iter_rows().enumerate() {
            let z = dot(row, w) + b;
            let s = self.weights.map_or(1.0, |ws| ws[i]);
            total += s * (softplus(z) - self.y[i] * z);
            let r = s * (sigmoid(z) - self.y[i]);
            if r != 0.0 {
                for (g, v) in grad[..d].iter_mut().zip(row) {
                    *g += r * v;
                }
                grad[d] += r;
            }
        }
        grad.iter_mut().for_each(|g| *g /= n);
        let mut reg = 0.0;
        for j in 0..d {
            reg += 0.5 * self.penalty[j] * w[j] * w[j];
            grad[j] += self.penalty[j] * w[j];
        }
        total / n + reg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for GdOptions {
    fn default() -> Self {
        Self { max_iters: 500, tol: 1e-6 }
    }
}

/// Full-batch gradient descent with Armijo backtracking, starting from zero.
///
/// The trial step of each iteration is the Barzilai-Borwein step of the last
/// move; backtracking halves it until sufficient decrease holds. Stops when
/// the gradient's max-norm drops below `tol`.
pub fn minimize(obj: &LogisticObjective<'_>, opts: GdOptions) -> (Vec<f64>, bool, usize) {
    let p = obj.n_params();
    let mut theta = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut loss = obj.loss_grad(&theta, &mut grad);
    let mut step = 1.0;
    let mut trial = vec![0.0; p];
    let mut trial_grad = vec![0.0; p];
    for it in 0..opts.max_iters {
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < opts.tol {
            return (theta, true, it);
        }
        let gsq: f64 = grad.iter().map(|g| g * g).sum();
        let mut accepted = false;
        for _ in 0..60 {
            for ((t, th), g) in trial.iter_mut().zip(&theta).zip(&grad) {
                *t = th - step * g;
            }
            if obj.loss(&trial) <= loss - 1e-4 * step * gsq {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no representable decrease left
            return (theta, gmax < opts.tol.sqrt(), it);
        }
        let new_loss = obj.loss_grad(&trial, &mut trial_grad);
        let (mut ss, mut sy) = (0.0, 0.0);
        for k in 0..p {
            let s = trial[k] - theta[k];
            ss += s * s;
            sy += s * (trial_grad[k] - grad[k]);
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { (step * 2.0).min(1e10) };
        std::mem::swap(&mut theta, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        loss = new_loss;
    }
    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    (theta, gmax < opts.tol, opts.max_iters)
}

/// L2-penalized logistic regression; see [`LogisticObjective`].
pub fn logistic_fit(
    x: &Matrix,
    y: &[f64],
    weights: Option<&[f64]>,
    l2: f64,
    penalty_scale: Option<&[f64]>,
    opts: GdOptions,
) -> Result<LogisticModel> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", opts.tol)));
    }
    let obj = LogisticObjective::new(x, y, weights, l2, penalty_scale)?;
    let (theta, converged, iterations) = minimize(&obj, opts);
    if !converged {
        log::debug!("logistic fit stopped after {iterations} iterations without reaching tol {}", opts.tol);
    }
    let d = x.cols();
    Ok(LogisticModel {
        coef: theta[..d].to_vec(),
        intercept: theta[d],
        converged,
        iterations,
    })
}

/// Mean log-loss of probabilities `p` against binary labels, with
/// probabilities clipped to `[1e-15, 1 - 1e-15]`.
pub fn log_loss(y: &[f64], p: &[f64]) -> f64 {
    let eps = 1e-15;
    y.iter()
        .zip(p)
        .map(|(&yi, &pi)| {
            let q = pi.clamp(eps, 1.0 - eps);
            -(yi * q.ln() + (1.0 - yi) * (1.0 - q).ln())
        })
        .sum::<f64>()
        / y.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng as _;

    fn random_problem(n: usize, d: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = stream_rng(seed, 0);
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let y = (0..n).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
        (x, y)
    }

    #[test]
    fn gradient_at_origin() {
        let (x, y) = random_problem(30, 4, 1);
        let obj = LogisticObjective::new(&x, &y, None, 0.7, None).unwrap();
        let mut g = vec![0.0; 5];
        obj.loss_grad(&[0.0; 5], &mut g);
        for j in 0..4 {
            let expect: f64 = (0..30).map(|i| x.get(i, j) * (0.5 - y[i])).sum::<f64>() / 30.0;
            assert!((g[j] - expect).abs() < 1e-15);
        }
        assert_eq!(LogisticModel { coef: vec![0.0; 4], intercept: 0.0, converged: true, iterations: 0 }.predict_row(x.row(0)), 0.5);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (x, y) = random_problem(50, 10, 7);
        let weights: Vec<f64> = (0..50).map(|i| 0.5 + (i % 3) as f64).collect();
        let scale: Vec<f64> = (0..10).map(|j| 1.0 + j as f64 * 0.1).collect();
        let obj = LogisticObjective::new(&x, &y, Some(&weights), 0.3, Some(&scale)).unwrap();
        let mut rng = stream_rng(7, 1);
        for _ in 0..10 {
            let theta: Vec<f64> = (0..11).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut g = vec![0.0; 11];
            obj.loss_grad(&theta, &mut g);
            for k in 0..11 {
                let h = 1e-6;
                let mut a = theta.clone();
                let mut b = theta.clone();
                a[k] += h;
                b[k] -= h;
                let fd = (obj.loss(&a) - obj.loss(&b)) / (2.0 * h);
                let rel = (fd - g[k]).abs() / g[k].abs().max(1e-8);
                assert!(rel < 1e-5, "param {k}: fd {fd} vs analytic {}", g[k]);
            }
        }
    }

    #[test]
    fn separable_data_with_penalty_converges() {
        let x = Matrix::from_vec(6, 1, vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]).unwrap();
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let m = logistic_fit(&x, &y, None, 1.0, None, GdOptions { max_iters: 5000, tol: 1e-8 }).unwrap();
        assert!(m.converged);
        assert!(m.coef[0].is_finite() && m.coef[0] > 0.0);
    }

    #[test]
    fn non_binary_labels_rejected() {
        let x = Matrix::zeros(2, 1);
        assert!(matches!(
            logistic_fit(&x, &[0.0, 0.5], None, 1.0, None, GdOptions::default()),
            Err(Error::NonBinary(_))
        ));
    }

    #[test]
    fn recovers_generating_coefficients() {
        let n = 4000;
        let mut rng = stream_rng(3, 0);
        let x = Matrix::from_vec(n, 2, (0..2 * n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let y: Vec<f64> = x
            .iter_rows()
            .map(|r| f64::from(u8::from(rng.random::<f64>() < sigmoid(1.5 * r[0] - 0.5 * r[1] + 0.3))))
            .collect();
        let m = logistic_fit(&x, &y, None, 1e-4, None, GdOptions::default()).unwrap();
        assert!(m.converged);
        assert!((m.coef[0] - 1.5).abs() < 0.2);
        assert!((m.coef[1] + 0.5).abs() < 0.15);
        assert!((m.intercept - 0.3).abs() < 0.15);
    }
}
