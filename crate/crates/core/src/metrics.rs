//! Evaluation metrics: the separate-relative uplift curve and its area,
//! bootstrap intervals, PEHE, policy risk and average-effect estimators.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Default number of grid points of the uplift curve.
pub const DEFAULT_BINS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftCurve {
    /// `k / K` for `k = 1..=K`.
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl UpliftCurve {
    pub fn bins(&self) -> usize {
        self.grid.len()
    }
}

/// A metric value with an optional confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: String,
    pub value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_bootstrap: usize,
    pub seed: u64,
}

impl MetricResult {
    pub fn point(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            ci_low: None,
            ci_high: None,
            n_bootstrap: 0,
            seed: 0,
        }
    }

    pub fn ci_width(&self) -> Option<f64> {
        Some(self.ci_high? - self.ci_low?)
    }

    /// Whether two intervals intersect.
    pub fn overlaps(&self, other: &MetricResult) -> Option<bool> {
        Some(self.ci_low? <= other.ci_high? && other.ci_low? <= self.ci_high?)
    }
}

fn check_lengths(a: usize, others: &[usize]) -> Result<()> {
    for &b in others {
        if a != b {
            return Err(Error::LengthMismatch(a, b));
        }
    }
    Ok(())
}

/// Outcome mean of each arm, summed in row order.
fn arm_means(y: &[f64], t: &[bool]) -> Result<(f64, f64)> {
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for (&yi, &ti) in y.iter().zip(t) {
        if ti {
            s1 += yi;
            n1 += 1;
        } else {
            s0 += yi;
            n0 += 1;
        }
    }
    if n1 == 0 {
        return Err(Error::EmptyArm("treated"));
    }
    if n0 == 0 {
        return Err(Error::EmptyArm("control"));
    }
    Ok((s1 / n1 as f64, s0 / n0 as f64))
}

/// Descending order; `-0.0` and `0.0` compare equal.
#[inline]
fn desc(a: f64, b: f64) -> std::cmp::Ordering {
    if a == b {
        std::cmp::Ordering::Equal
    } else {
        b.total_cmp(&a)
    }
}

/// Arm rows sorted by score descending, ties by original index.
fn ranked_arm(scores: &[f64], t: &[bool], arm: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| t[i] == arm).collect();
    idx.sort_by(|&a, &b| desc(scores[a], scores[b]).then(a.cmp(&b)));
    idx
}

/// `ceil(k * n / bins)` in integer arithmetic.
#[inline]
fn cutoff(k: usize, n: usize, bins: usize) -> usize {
    (k * n).div_ceil(bins)
}

/// Means of the top-`cutoff(k)` rows, for `k = 1..=bins`, given outcomes in
/// ranked order with multiplicities.
fn top_means(ranked_y: impl Iterator<Item = (f64, usize)>, n: usize, bins: usize, full_mean: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(bins);
    let mut k = 1;
    let (mut taken, mut sum) = (0usize, 0.0);
    let mut ranked_y = ranked_y.peekable();
    while k <= bins {
        let c = cutoff(k, n, bins);
        if c == n {
            out.push(full_mean);
            k += 1;
            continue;
        }
        while taken < c {
            let (y, mult) = ranked_y.peek_mut().expect("cutoff within arm size");
            let use_now = (*mult).min(c - taken);
            sum += *y * use_now as f64;
            taken += use_now;
            *mult -= use_now;
            if *mult == 0 {
                ranked_y.next();
            }
        }
        out.push(sum / c as f64);
        k += 1;
    }
    out
}

fn validate_curve_inputs(scores: &[f64], y: &[f64], t: &[bool], bins: usize) -> Result<(usize, usize)> {
    check_lengths(scores.len(), &[y.len(), t.len()])?;
    let n1 = t.iter().filter(|&&b| b).count();
    let n0 = t.len() - n1;
    if n1 == 0 {
        return Err(Error::EmptyArm("treated"));
    }
    if n0 == 0 {
        return Err(Error::EmptyArm("control"));
    }
    if bins == 0 || bins > n1.min(n0) {
        return Err(Error::InvalidArgument(format!(
            "curve resolution must lie in 1..={}, got {bins}",
            n1.min(n0)
        )));
    }
    Ok((n1, n0))
}

/// Separate, relative uplift curve: each arm is ranked by its own scores and
/// `curve(rho)` is the outcome mean of the top `ceil(rho * n_t)` treated
/// rows minus that of the top `ceil(rho * n_c)` control rows.
pub fn uplift_curve(scores: &[f64], y: &[f64], t: &[bool], bins: usize) -> Result<UpliftCurve> {
    let (n1, n0) = validate_curve_inputs(scores, y, t, bins)?;
    let (m1, m0) = arm_means(y, t)?;
    let treated = ranked_arm(scores, t, true);
    let control = ranked_arm(scores, t, false);
    let top1 = top_means(treated.iter().map(|&i| (y[i], 1)), n1, bins, m1);
    let top0 = top_means(control.iter().map(|&i| (y[i], 1)), n0, bins, m0);
    Ok(UpliftCurve {
        grid: (1..=bins).map(|k| k as f64 / bins as f64).collect(),
        values: top1.iter().zip(&top0).map(|(a, b)| a - b).collect(),
    })
}

/// Rectangle rule on the curve grid.
pub fn auuc(curve: &UpliftCurve) -> f64 {
    curve.values.iter().sum::<f64>() / curve.bins() as f64
}

pub fn auuc_score(scores: &[f64], y: &[f64], t: &[bool], bins: usize) -> Result<f64> {
    Ok(auuc(&uplift_curve(scores, y, t, bins)?))
}

/// Value at quantile `q` with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// AUUC with a 95% percentile bootstrap interval.
///
/// Rows are resampled with replacement within each arm, so arm sizes are
/// fixed and a replicate can never lose an arm. Replicate `b` draws from
/// stream `b` of `seed`, so the result does not depend on the thread count.
/// The interval is widened to contain the point estimate when needed.
pub fn auuc_ci(scores: &[f64], y: &[f64], t: &[bool], bins: usize, n_bootstrap: usize, seed: u64) -> Result<MetricResult> {
    if n_bootstrap < 2 {
        return Err(Error::InvalidArgument(format!("n_bootstrap must be >= 2, got {n_bootstrap}")));
    }
    let value = auuc_score(scores, y, t, bins)?;
    let (n1, n0) = validate_curve_inputs(scores, y, t, bins)?;
    let ranked_y1: Vec<f64> = ranked_arm(scores, t, true).into_iter().map(|i| y[i]).collect();
    let ranked_y0: Vec<f64> = ranked_arm(scores, t, false).into_iter().map(|i| y[i]).collect();

    let replicate = |b: usize| -> f64 {
        let mut rng = stream_rng(seed, b as u64);
        let mut arm = |ranked: &[f64], n: usize| -> Vec<f64> {
            let mut counts = vec![0usize; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            let full = ranked.iter().zip(&counts).map(|(y, &c)| y * c as f64).sum::<f64>() / n as f64;
            top_means(
                ranked.iter().zip(counts.iter()).filter(|(_, &c)| c > 0).map(|(&y, &c)| (y, c)),
                n,
                bins,
                full,
            )
        };
        let a = arm(&ranked_y1, n1);
        let c = arm(&ranked_y0, n0);
        a.iter().zip(&c).map(|(p, q)| p - q).sum::<f64>() / bins as f64
    };
    let mut reps: Vec<f64> = (0..n_bootstrap).into_par_iter().map(replicate).collect();
    reps.sort_by(f64::total_cmp);
    let lo = quantile(&reps, 0.025).min(value);
    let hi = quantile(&reps, 0.975).max(value);
    Ok(MetricResult {
        name: "auuc".into(),
        value,
        ci_low: Some(lo),
        ci_high: Some(hi),
        n_bootstrap,
        seed,
    })
}

/// Square root of the precision in estimation of heterogeneous effects.
pub fn pehe(tau_true: &[f64], tau_pred: &[f64]) -> Result<f64> {
    check_lengths(tau_true.len(), &[tau_pred.len()])?;
    if tau_true.is_empty() {
        return Err(Error::InvalidArgument("pehe of empty vectors".into()));
    }
    let mse = tau_true
        .iter()
        .zip(tau_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / tau_true.len() as f64;
    Ok(mse.sqrt())
}

/// Risk of the policy `score > threshold`, estimated on randomized data.
///
/// An empty conditional cell contributes zero and is logged.
pub fn policy_risk(scores: &[f64], y: &[f64], t: &[bool], threshold: f64) -> Result<f64> {
    check_lengths(scores.len(), &[y.len(), t.len()])?;
    arm_means(y, t)?;
    let n = scores.len() as f64;
    let (mut treat_n, mut s11, mut n11, mut s00, mut n00) = (0usize, 0.0, 0usize, 0.0, 0usize);
    for ((&s, &yi), &ti) in scores.iter().zip(y).zip(t) {
        let treat = s > threshold;
        treat_n += usize::from(treat);
        match (treat, ti) {
            (true, true) => {
                s11 += yi;
                n11 += 1;
            }
            (false, false) => {
                s00 += yi;
                n00 += 1;
            }
            _ => {}
        }
    }
    let p_treat = treat_n as f64 / n;
    let cell = |s: f64, c: usize, what: &str| {
        if c == 0 {
            log::warn!("policy risk: no rows with {what}; cell contributes 0");
            0.0
        } else {
            s / c as f64
        }
    };
    let v1 = if p_treat > 0.0 { cell(s11, n11, "policy=1, treatment=1") } else { 0.0 };
    let v0 = if p_treat < 1.0 { cell(s00, n00, "policy=0, treatment=0") } else { 0.0 };
    Ok(1.0 - (v1 * p_treat + v0 * (1.0 - p_treat)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AteMode {
    DiffMeans,
    Ipw,
}

/// Population average effect, by difference in arm means or by inverse
/// propensity weighting.
pub fn ate(y: &[f64], t: &[bool], mode: AteMode, propensities: Option<&[f64]>) -> Result<f64> {
    check_lengths(y.len(), &[t.len()])?;
    match mode {
        AteMode::DiffMeans => {
            let (m1, m0) = arm_means(y, t)?;
            Ok(m1 - m0)
        }
        AteMode::Ipw => {
            let p = propensities.ok_or_else(|| Error::InvalidArgument("ipw needs propensities".into()))?;
            check_lengths(y.len(), &[p.len()])?;
            arm_means(y, t)?;
            let mut s = 0.0;
            for ((&yi, &ti), &pi) in y.iter().zip(t).zip(p) {
                if !(pi > 0.0 && pi < 1.0) {
                    return Err(Error::DegeneratePropensity(pi));
                }
                s += if ti { yi / pi } else { -yi / (1.0 - pi) };
            }
            Ok(s / y.len() as f64)
        }
    }
}

/// Average effect on the treated from known per-row effects.
pub fn att(tau: &[f64], t: &[bool]) -> Result<f64> {
    check_lengths(tau.len(), &[t.len()])?;
    let (s, n) = tau
        .iter()
        .zip(t)
        .filter(|(_, &ti)| ti)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    if n == 0 {
        return Err(Error::EmptyArm("treated"));
    }
    Ok(s / n as f64)
}
