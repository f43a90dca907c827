use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::matrix::dot;
use crate::rng::Rng;

/// Default effect targeted by calibration.
pub const TARGET_EFFECT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    CaseA,
    CaseB,
    MultiPeaked,
}

impl SurfaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::CaseA => "case-a",
            SurfaceKind::CaseB => "case-b",
            SurfaceKind::MultiPeaked => "multi-peaked",
        }
    }
}

/// Discrete distribution each coefficient of a linear surface is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSupport {
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl BetaSupport {
    pub fn case_a() -> Self {
        Self {
            values: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            probabilities: vec![0.5, 0.2, 0.15, 0.1, 0.05],
        }
    }

    pub fn case_b() -> Self {
        Self {
            values: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            probabilities: vec![0.6, 0.1, 0.1, 0.1, 0.1],
        }
    }

    pub fn sample(&self, dims: usize, rng: &mut Rng) -> Result<Vec<f64>> {
        if self.values.len() != self.probabilities.len() || self.values.is_empty() {
            return Err(Error::InvalidArgument("beta support and probabilities differ in length".into()));
        }
        let total: f64 = self.probabilities.iter().sum();
        Ok((0..dims)
            .map(|_| {
                let mut u = rng.random::<f64>() * total;
                for (v, p) in self.values.iter().zip(&self.probabilities) {
                    if u < *p {
                        return *v;
                    }
                    u -= p;
                }
                *self.values.last().unwrap()
            })
            .collect())
    }
}

/// A pair of response surfaces `(mu0, mu1)` over the encoded feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Surface {
    /// `mu0 = x.beta`, `mu1 = x.beta + effect`.
    CaseA { beta: Vec<f64>, effect: f64 },
    /// `mu0 = exp((x + offset).beta)`, `mu1 = x.beta - omega`.
    CaseB { beta: Vec<f64>, offset: f64, omega: f64 },
    /// Gaussian bumps: `mu_t = sum_c w_t[c] * exp(-|x - c|^2 / (2 sigma_c^2))`.
    MultiPeaked {
        anchors: Vec<Vec<f64>>,
        w0: Vec<f64>,
        w1: Vec<f64>,
        sigmas: Vec<f64>,
    },
}

impl Surface {
    pub fn kind(&self) -> SurfaceKind {
        match self {
            Surface::CaseA { .. } => SurfaceKind::CaseA,
            Surface::CaseB { .. } => SurfaceKind::CaseB,
            Surface::MultiPeaked { .. } => SurfaceKind::MultiPeaked,
        }
    }

    pub fn validate(&self, dims: usize) -> Result<()> {
        match self {
            Surface::CaseA { beta, .. } | Surface::CaseB { beta, .. } if beta.len() != dims => {
                Err(Error::LengthMismatch(beta.len(), dims))
            }
            Surface::MultiPeaked { anchors, w0, w1, sigmas } => {
                let k = anchors.len();
                if w0.len() != k || w1.len() != k || sigmas.len() != k {
                    return Err(Error::InvalidArgument(
                        "anchors, weights and widths must have equal lengths".into(),
                    ));
                }
                if sigmas.iter().any(|&s| !(s > 0.0)) {
                    return Err(Error::InvalidArgument("anchor widths must be positive".into()));
                }
                if let Some(a) = anchors.iter().find(|a| a.len() != dims) {
                    return Err(Error::LengthMismatch(a.len(), dims));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Kernel weights of `x` for every anchor.
    fn kernels<'a>(anchors: &'a [Vec<f64>], sigmas: &'a [f64], x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        anchors.iter().zip(sigmas).map(move |(c, s)| {
            let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / (2.0 * s * s)).exp()
        })
    }

    /// `(mu0(x), mu1(x))`; `None` when the exponential overflows.
    pub fn eval_row(&self, x: &[f64]) -> Option<(f64, f64)> {
        match self {
            Surface::CaseA { beta, effect } => {
                let lin = dot(x, beta);
                Some((lin, lin + effect))
            }
            Surface::CaseB { beta, offset, omega } => {
                let lin = dot(x, beta);
                let shifted: f64 = x.iter().zip(beta).map(|(xi, b)| (xi + offset) * b).sum();
                let mu0 = shifted.exp();
                mu0.is_finite().then_some((mu0, lin - omega))
            }
            Surface::MultiPeaked { anchors, w0, w1, sigmas } => {
                let (mut m0, mut m1) = (0.0, 0.0);
                for ((k, a), b) in Self::kernels(anchors, sigmas, x).zip(w0).zip(w1) {
                    m0 += a * k;
                    m1 += b * k;
                }
                Some((m0, m1))
            }
        }
    }
}

/// Row-wise `(mu0, mu1)` over the encoded matrix.
pub fn eval_surface(surface: &Surface, enc: &EncodedMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    surface.validate(enc.dims())?;
    let mut mu0 = Vec::with_capacity(enc.rows());
    let mut mu1 = Vec::with_capacity(enc.rows());
    for (row, x) in enc.matrix.iter_rows().enumerate() {
        let (a, b) = surface.eval_row(x).ok_or(Error::Overflow { row })?;
        mu0.push(a);
        mu1.push(b);
    }
    Ok((mu0, mu1))
}

/// Fixes the free scale of a surface so that its average effect hits `target`.
///
/// Case B solves for `omega` so that the effect averaged over treated rows
/// equals `target`; multi-peaked surfaces scale every weight difference
/// `w1 - w0` by the factor that brings the effect averaged over all rows to
/// `target`. Case A is returned unchanged.
pub fn calibrate(surface: &Surface, enc: &EncodedMatrix, treatments: &[bool], target: f64) -> Result<Surface> {
    surface.validate(enc.dims())?;
    match surface {
        Surface::CaseA { .. } => Ok(surface.clone()),
        Surface::CaseB { beta, offset, omega } => {
            if treatments.len() != enc.rows() {
                return Err(Error::LengthMismatch(treatments.len(), enc.rows()));
            }
            // omega enters mu1 linearly: ATT(omega) = ATT(0) - omega
            let (mu0, mu1) = eval_surface(surface, enc)?;
            let (mut sum, mut n) = (0.0, 0usize);
            for ((a, b), &t) in mu0.iter().zip(&mu1).zip(treatments) {
                if t {
                    sum += b + omega - a;
                    n += 1;
                }
            }
            if n == 0 {
                return Err(Error::Calibration("no treated rows to compute the ATT on".into()));
            }
            Ok(Surface::CaseB {
                beta: beta.clone(),
                offset: *offset,
                omega: sum / n as f64 - target,
            })
        }
        Surface::MultiPeaked { anchors, w0, w1, sigmas } => {
            let (mu0, mu1) = eval_surface(surface, enc)?;
            let ate = mu1.iter().zip(&mu0).map(|(b, a)| b - a).sum::<f64>() / enc.rows() as f64;
            if !ate.is_finite() || ate.abs() < 1e-300 {
                return Err(Error::Calibration(
                    "average effect of the surface is zero; cannot rescale".into(),
                ));
            }
            let s = target / ate;
            Ok(Surface::MultiPeaked {
                anchors: anchors.clone(),
                w0: w0.clone(),
                w1: w0.iter().zip(w1).map(|(a, b)| a + s * (b - a)).collect(),
                sigmas: sigmas.clone(),
            })
        }
    }
}

/// Linear surface with coefficients drawn from `support`.
pub fn sample_linear(kind: SurfaceKind, dims: usize, support: &BetaSupport, offset: f64, rng: &mut Rng) -> Result<Surface> {
    let beta = support.sample(dims, rng)?;
    match kind {
        SurfaceKind::CaseA => Ok(Surface::CaseA { beta, effect: TARGET_EFFECT }),
        SurfaceKind::CaseB => Ok(Surface::CaseB { beta, offset, omega: 0.0 }),
        SurfaceKind::MultiPeaked => Err(Error::InvalidArgument("multi-peaked surfaces are not linear".into())),
    }
}

/// Multi-peaked surface anchored on `n_anchors` distinct rows drawn
/// uniformly from `enc`, with weights from U(0, 1) and a common width.
pub fn sample_multi_peaked(enc: &EncodedMatrix, n_anchors: usize, sigma: f64, rng: &mut Rng) -> Result<Surface> {
    if n_anchors == 0 || n_anchors > enc.rows() {
        return Err(Error::InvalidArgument(format!(
            "need 1..={} anchors, got {n_anchors}",
            enc.rows()
        )));
    }
    let mut rows = index::sample(rng, enc.rows(), n_anchors).into_vec();
    rows.sort_unstable();
    let anchors = rows.iter().map(|&i| enc.matrix.row(i).to_vec()).collect();
    let w0 = (0..n_anchors).map(|_| rng.random::<f64>()).collect();
    let w1 = (0..n_anchors).map(|_| rng.random::<f64>()).collect();
    Ok(Surface::MultiPeaked {
        anchors,
        w0,
        w1,
        sigmas: vec![sigma; n_anchors],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::encode;
    use crate::rng::stream_rng;
    use crate::synth::gen_covariates;
    use proptest::prelude::*;

    fn single_anchor(c: Vec<f64>, sigma: f64) -> Surface {
        Surface::MultiPeaked {
            anchors: vec![c],
            w0: vec![0.2],
            w1: vec![0.7],
            sigmas: vec![sigma],
        }
    }

    #[test]
    fn anchor_point_returns_its_weights() {
        let s = single_anchor(vec![1.0, -2.0], 1.0);
        let (m0, m1) = s.eval_row(&[1.0, -2.0]).unwrap();
        assert_eq!((m0, m1), (0.2, 0.7));
        assert!((m1 - m0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn effect_halves_at_half_height_radius() {
        let sigma = 1.3;
        let r = sigma * (2.0 * 2f64.ln()).sqrt();
        let s = single_anchor(vec![0.0, 0.0], sigma);
        let (m0, m1) = s.eval_row(&[r * 0.6, r * 0.8]).unwrap();
        assert!((m1 - m0 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn case_a_constant_effect() {
        let enc = encode(&gen_covariates(200, 1), 3, 4, 1).unwrap();
        let s = sample_linear(SurfaceKind::CaseA, enc.dims(), &BetaSupport::case_a(), 0.5, &mut stream_rng(1, 1)).unwrap();
        let (mu0, mu1) = eval_surface(&s, &enc).unwrap();
        assert!(mu0.iter().zip(&mu1).all(|(a, b)| b - a == 4.0 || (b - a - 4.0).abs() < 1e-12));
        assert_eq!(calibrate(&s, &enc, &vec![true; 200], 4.0).unwrap(), s);
    }

    #[test]
    fn case_b_overflow_is_reported() {
        let enc = encode(&gen_covariates(5, 1), 0, 2, 1).unwrap();
        let s = Surface::CaseB { beta: vec![1e4; 4], offset: 0.5, omega: 0.0 };
        assert!(matches!(eval_surface(&s, &enc), Err(Error::Overflow { .. })));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let enc = encode(&gen_covariates(5, 1), 0, 2, 1).unwrap();
        let s = Surface::CaseA { beta: vec![1.0; 3], effect: 4.0 };
        assert!(eval_surface(&s, &enc).is_err());
        let s = Surface::MultiPeaked { anchors: vec![vec![0.0; 4]], w0: vec![0.0], w1: vec![1.0], sigmas: vec![0.0] };
        assert!(eval_surface(&s, &enc).is_err());
    }

    #[test]
    fn multi_peaked_scaling_from_ate_two() {
        let s = Surface::MultiPeaked {
            anchors: vec![vec![0.0; 4]],
            w0: vec![1.0],
            w1: vec![3.0],
            sigmas: vec![1e6],
        };
        let enc = encode(&gen_covariates(20, 1), 0, 2, 1).unwrap();
        let (m0, m1) = eval_surface(&s, &enc).unwrap();
        let ate: f64 = m1.iter().zip(&m0).map(|(b, a)| b - a).sum::<f64>() / 20.0;
        assert!((ate - 2.0).abs() < 1e-9);
        let c = calibrate(&s, &enc, &[], 4.0).unwrap();
        let Surface::MultiPeaked { w0, w1, .. } = &c else { unreachable!() };
        // s = 4 / ate ~ 2
        assert!((w1[0] - w0[0] - 2.0 * 4.0 / ate).abs() < 1e-9);
        let (m0, m1) = eval_surface(&c, &enc).unwrap();
        let ate: f64 = m1.iter().zip(&m0).map(|(b, a)| b - a).sum::<f64>() / 20.0;
        assert!((ate - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_effect_cannot_be_calibrated() {
        let s = Surface::MultiPeaked { anchors: vec![vec![0.0; 4]], w0: vec![0.5], w1: vec![0.5], sigmas: vec![1.0] };
        let enc = encode(&gen_covariates(20, 1), 0, 2, 1).unwrap();
        assert!(matches!(calibrate(&s, &enc, &[], 4.0), Err(Error::Calibration(_))));
    }

    #[test]
    fn case_b_att_matches_bisection() {
        let enc = encode(&gen_covariates(3000, 4), 5, 6, 4).unwrap();
        let s = sample_linear(SurfaceKind::CaseB, enc.dims(), &BetaSupport::case_b(), 0.5, &mut stream_rng(4, 2)).unwrap();
        let t: Vec<bool> = (0..enc.rows()).map(|i| i % 3 != 0).collect();
        let att = |omega: f64| {
            let Surface::CaseB { beta, offset, .. } = &s else { unreachable!() };
            let probe = Surface::CaseB { beta: beta.clone(), offset: *offset, omega };
            let (m0, m1) = eval_surface(&probe, &enc).unwrap();
            let (mut sum, mut n) = (0.0, 0.0);
            for i in 0..enc.rows() {
                if t[i] {
                    sum += m1[i] - m0[i];
                    n += 1.0;
                }
            }
            sum / n
        };
        // bisection on the monotone decreasing map omega -> ATT
        let (mut lo, mut hi) = (-1e4, 1e4);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if att(mid) > 4.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let c = calibrate(&s, &enc, &t, 4.0).unwrap();
        let Surface::CaseB { omega, .. } = c else { unreachable!() };
        assert!((omega - 0.5 * (lo + hi)).abs() < 1e-8);
        assert!((att(omega) - 4.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn anchor_sets_add(
            pts in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 2..8),
            ws in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.3f64..3.0), 2..8),
            x in prop::collection::vec(-2.0f64..2.0, 3),
        ) {
            let k = pts.len().min(ws.len());
            let build = |r: std::ops::Range<usize>| Surface::MultiPeaked {
                anchors: pts[r.clone()].to_vec(),
                w0: ws[r.clone()].iter().map(|w| w.0).collect(),
                w1: ws[r.clone()].iter().map(|w| w.1).collect(),
                sigmas: ws[r].iter().map(|w| w.2).collect(),
            };
            let half = k / 2;
            let (a0, a1) = build(0..k).eval_row(&x).unwrap();
            let (b0, b1) = build(0..half).eval_row(&x).unwrap();
            let (c0, c1) = build(half..k).eval_row(&x).unwrap();
            prop_assert!((a0 - b0 - c0).abs() < 1e-12);
            prop_assert!((a1 - b1 - c1).abs() < 1e-12);
        }
    }
}
