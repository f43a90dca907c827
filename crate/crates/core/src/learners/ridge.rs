use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    #[inline]
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        dot(x, &self.coef) + self.intercept
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.affine(&self.coef, self.intercept)
    }
}

/// Weighted ridge regression in closed form.
///
/// Minimizes `sum_i s_i (y_i - x_i.w - b)^2 + l2 * |w|^2` with an
/// unpenalized intercept (when `fit_intercept`), by centering on the weighted
/// means and a Cholesky solve of the normal equations.
pub fn ridge_fit(x: &Matrix, y: &[f64], weights: Option<&[f64]>, l2: f64, fit_intercept: bool) -> Result<RidgeModel> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::InvalidArgument("ridge fit on zero rows".into()));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch(y.len(), n));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::LengthMismatch(w.len(), n));
        }
    }
    if !(l2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("l2 must be >= 0, got {l2}")));
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);

    let (mut x_mean, mut y_mean) = (vec![0.0; d], 0.0);
    if fit_intercept {
        let mut total = 0.0;
        for (i, row) in x.iter_rows().enumerate() {
            let s = weight(i);
            total += s;
            y_mean += s * y[i];
            for (m, v) in x_mean.iter_mut().zip(row) {
                *m += s * v;
            }
        }
        if total <= 0.0 {
            return Err(Error::InvalidArgument("sample weights sum to zero".into()));
        }
        y_mean /= total;
        x_mean.iter_mut().for_each(|m| *m /= total);
    }

    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut xc = vec![0.0; d];
    for (i, row) in x.iter_rows().enumerate() {
        let s = weight(i);
        if s == 0.0 {
            continue;
        }
        for ((c, v), m) in xc.iter_mut().zip(row).zip(&x_mean) {
            *c = v - m;
        }
        let yc = y[i] - y_mean;
        for a in 0..d {
            let sa = s * xc[a];
            if sa == 0.0 {
                continue;
            }
            rhs[a] += sa * yc;
            let g = &mut gram[a * d..a * d + d];
            for b in a..d {
                g[b] += sa * xc[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[a * d + b] = gram[b * d + a];
        }
        gram[a * d + a] += l2;
    }

    let coef = if d == 0 {
        Vec::new()
    } else {
        let scale = (0..d).map(|a| gram[a * d + a].abs()).fold(0.0, f64::max);
        let a = DMatrix::from_row_slice(d, d, &gram);
        let chol = a.cholesky().ok_or(Error::Singular)?;
        let l = chol.l_dirty();
        let min_pivot = (0..d).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if !(min_pivot > scale * 1e-13) {
            return Err(Error::Singular);
        }
        chol.solve(&DVector::from_vec(rhs)).as_slice().to_vec()
    };
    let intercept = if fit_intercept { y_mean - dot(&x_mean, &coef) } else { 0.0 };
    Ok(RidgeModel { coef, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn exact_fit_without_penalty() {
        let m = ridge_fit(&col(&[1.0, 2.0]), &[1.0, 2.0], None, 0.0, false).unwrap();
        assert!((m.coef[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_dimensional_shrinkage() {
        // w = sum(xy) / (sum(x^2) + l2) = 5 / 10
        let m = ridge_fit(&col(&[1.0, 2.0]), &[1.0, 2.0], None, 5.0, false).unwrap();
        assert!((m.coef[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn constant_target() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![3.0, 2.0], vec![-1.0, 5.0]]).unwrap();
        let m = ridge_fit(&x, &[2.5; 3], None, 0.1, true).unwrap();
        assert!(m.coef.iter().all(|c| c.abs() < 1e-12));
        assert!((m.intercept - 2.5).abs() < 1e-12);
    }

    #[test]
    fn singular_without_penalty() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        assert!(matches!(ridge_fit(&x, &[1.0, 2.0, 3.0], None, 0.0, true), Err(Error::Singular)));
        assert!(ridge_fit(&x, &[1.0, 2.0, 3.0], None, 1e-3, true).is_ok());
    }

    #[test]
    fn weights_match_row_duplication() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let dup = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![1.0], vec![2.0]]).unwrap();
        let a = ridge_fit(&x, &[0.0, 3.0, 1.0], Some(&[1.0, 2.0, 1.0]), 0.3, true).unwrap();
        let b = ridge_fit(&dup, &[0.0, 3.0, 3.0, 1.0], None, 0.3, true).unwrap();
        assert!((a.coef[0] - b.coef[0]).abs() < 1e-12);
        assert!((a.intercept - b.intercept).abs() < 1e-12);
    }
}
