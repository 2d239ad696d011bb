use serde::{Deserialize, Serialize};

use super::{EvalError, MetricResult as Result};
use crate::conformal::PredictionInterval;

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn rmse(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(predictions, labels)?;
    let sse: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Pearson correlation coefficient.
pub fn correlation(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(predictions, labels)?;
    let n = predictions.len() as f64;
    let mp = predictions.iter().sum::<f64>() / n;
    let my = labels.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, y) in predictions.iter().zip(labels) {
        let (dp, dy) = (p - mp, y - my);
        sxy += dp * dy;
        sxx += dp * dp;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::Degenerate(
            "correlation of a constant sequence is undefined".to_string(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Quantile of ascending-sorted data by linear interpolation between order
/// statistics at 1-based position `1 + (n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    match sorted.get(lo + 1) {
        Some(&hi) if frac > 0.0 => sorted[lo] + frac * (hi - sorted[lo]),
        _ => sorted[lo],
    }
}

/// Boxplot summary of interval widths plus the interdecile mean, the mean
/// of the widths lying in `[P10, P90]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthStats {
    pub decile_10: f64,
    pub quartile_25: f64,
    pub median: f64,
    pub quartile_75: f64,
    pub decile_90: f64,
    pub interdecile_mean: f64,
}

pub fn width_stats(widths: &[f64]) -> Result<WidthStats> {
    if widths.is_empty() {
        return Err(EvalError::Empty);
    }
    if widths.iter().any(|w| !w.is_finite()) {
        return Err(EvalError::Degenerate(
            "non-finite interval width".to_string(),
        ));
    }
    let mut sorted = widths.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&sorted, p);
    let (p10, p90) = (q(0.1), q(0.9));
    let inner: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|&w| p10 <= w && w <= p90)
        .collect();
    // only two distinct values can leave [P10, P90] without an order statistic
    let inner = if inner.is_empty() {
        sorted.clone()
    } else {
        inner
    };
    let interdecile_mean = inner.iter().sum::<f64>() / inner.len() as f64;
    Ok(WidthStats {
        decile_10: p10,
        quartile_25: q(0.25),
        median: q(0.5),
        quartile_75: q(0.75),
        decile_90: p90,
        interdecile_mean,
    })
}

/// Percentage of labels falling outside their interval; endpoints count as
/// covered.
pub fn miscoverage(intervals: &[PredictionInterval], labels: &[f64]) -> Result<f64> {
    if intervals.len() != labels.len() {
        return Err(EvalError::LengthMismatch(intervals.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let misses = intervals
        .iter()
        .zip(labels)
        .filter(|(iv, &y)| !iv.contains(y))
        .count();
    Ok(100.0 * misses as f64 / labels.len() as f64)
}
