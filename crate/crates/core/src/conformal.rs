//! Nonconformity measures, calibration bookkeeping, p-values and interval
//! construction for inductive conformal regression.
//!
//! The calibration scores are kept sorted in descending order. For a
//! significance level `delta` the critical index is
//! `s = floor(delta * (q + 1))` and the half-width of every interval is the
//! `s`-th largest calibration score (scaled by `exp(mu) + beta` for the
//! normalized measure).
//!
//! The set of candidate labels whose p-value exceeds `delta` is the closed
//! interval `[y_hat - a, y_hat + a]`; only the two endpoints themselves are
//! not strictly inside the open interval the algorithm outputs. Coverage is
//! therefore evaluated with closed intervals throughout the crate.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConformalError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate normalizer: exp(mu) + beta = {0}")]
    DegenerateNormalizer(f64),
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error(
        "insufficient calibration: delta = {delta} with q = {q} gives s = 0 \
         (an unbounded interval); increase q to at least {min_q}"
    )]
    InsufficientCalibration { delta: f64, q: usize, min_q: usize },
    #[error("degenerate confidence: delta = {delta} with q = {q} gives s = {s} > q")]
    DegenerateConfidence { delta: f64, q: usize, s: usize },
}

pub type Result<T> = std::result::Result<T, ConformalError>;

/// A finite, non-negative nonconformity score.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NonconformityScore(f64);

impl NonconformityScore {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(ConformalError::InvalidInput(format!(
                "nonconformity score must be finite and non-negative, got {value}"
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Difficulty estimate for one example used by the normalized measure.
///
/// `mu` is the predicted natural log of the absolute residual, `beta` the
/// sensitivity constant. The normalizer is `exp(mu) + beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationParams {
    beta: f64,
    mu: f64,
}

impl NormalizationParams {
    pub fn new(beta: f64, mu: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(ConformalError::InvalidInput(format!(
                "beta must be finite and non-negative, got {beta}"
            )));
        }
        if !mu.is_finite() {
            return Err(ConformalError::InvalidInput(format!(
                "mu must be finite, got {mu}"
            )));
        }
        let scale = mu.exp() + beta;
        if !scale.is_finite() || scale <= 0.0 {
            return Err(ConformalError::DegenerateNormalizer(scale));
        }
        Ok(Self { beta, mu })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `exp(mu) + beta`.
    pub fn scale(&self) -> f64 {
        self.mu.exp() + self.beta
    }
}

/// Which nonconformity measure an ICP uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Measure {
    /// `|y - y_hat|`
    Absolute,
    /// `|y - y_hat| / (exp(mu) + beta)`
    Normalized { beta: f64 },
}

impl Measure {
    pub fn is_normalized(&self) -> bool {
        matches!(self, Measure::Normalized { .. })
    }

    /// Short stable identifier, e.g. `absolute` or `normalized-b0.5`.
    pub fn key(&self) -> String {
        match self {
            Measure::Absolute => "absolute".to_string(),
            Measure::Normalized { beta } => format!("normalized-b{beta}"),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Absolute => write!(f, "absolute"),
            Measure::Normalized { beta } => write!(f, "normalized (beta = {beta})"),
        }
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConformalError::InvalidInput(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

pub fn score_absolute(y: f64, y_hat: f64) -> Result<NonconformityScore> {
    check_finite("label", y)?;
    check_finite("prediction", y_hat)?;
    NonconformityScore::new((y - y_hat).abs())
}

pub fn score_normalized(
    y: f64,
    y_hat: f64,
    norm: &NormalizationParams,
) -> Result<NonconformityScore> {
    check_finite("label", y)?;
    check_finite("prediction", y_hat)?;
    let scale = norm.scale();
    if scale.is_nan() || scale <= 0.0 {
        return Err(ConformalError::DegenerateNormalizer(scale));
    }
    NonconformityScore::new((y - y_hat).abs() / scale)
}

/// Calibration nonconformity scores, sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationScores {
    scores: Vec<f64>,
}

impl CalibrationScores {
    pub fn new(raw_scores: impl IntoIterator<Item = NonconformityScore>) -> Result<Self> {
        let mut scores: Vec<f64> = raw_scores.into_iter().map(|s| s.value()).collect();
        if scores.is_empty() {
            return Err(ConformalError::EmptyCalibration);
        }
        scores.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { scores })
    }

    /// Validates raw values before sorting; NaN, infinities and negative
    /// values are rejected.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let scores = values
            .iter()
            .map(|&v| NonconformityScore::new(v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(scores)
    }

    pub fn q(&self) -> usize {
        self.scores.len()
    }

    /// Descending-sorted scores.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// The `s`-th largest score, 1-indexed.
    pub fn nth_largest(&self, s: usize) -> Option<f64> {
        s.checked_sub(1).and_then(|i| self.scores.get(i).copied())
    }

    /// The `s`-th largest score for `s = critical_index(delta, q)`.
    pub fn critical_score(&self, delta: f64) -> Result<f64> {
        let s = critical_index(delta, self.q())?;
        Ok(self.scores[s - 1])
    }
}

pub fn build_calibration(raw_scores: &[NonconformityScore]) -> Result<CalibrationScores> {
    CalibrationScores::new(raw_scores.iter().copied())
}

/// `s = floor(delta * (q + 1))`, required to lie in `1..=q`.
///
/// The product is nudged by a few ulps before flooring so that decimal
/// significance levels such as 0.29 with q = 99 land on the intended integer.
pub fn critical_index(delta: f64, q: usize) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ConformalError::InvalidInput(format!(
            "significance level must lie in (0, 1), got {delta}"
        )));
    }
    if q == 0 {
        return Err(ConformalError::EmptyCalibration);
    }
    let product = delta * (q as f64 + 1.0);
    let s = (product * (1.0 + 8.0 * f64::EPSILON)).floor() as usize;
    if s == 0 {
        let min_q = ((1.0 / delta).ceil() as usize).saturating_sub(1).max(1);
        return Err(ConformalError::InsufficientCalibration { delta, q, min_q });
    }
    if s > q {
        return Err(ConformalError::DegenerateConfidence { delta, q, s });
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
}

impl PredictionInterval {
    fn centered(y_hat: f64, half_width: f64, confidence: f64) -> Self {
        Self {
            lower: y_hat - half_width,
            upper: y_hat + half_width,
            confidence,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Closed-interval membership; endpoints count as covered.
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

pub fn interval_absolute(
    y_hat: f64,
    calib: &CalibrationScores,
    delta: f64,
) -> Result<PredictionInterval> {
    check_finite("prediction", y_hat)?;
    let a = calib.critical_score(delta)?;
    Ok(PredictionInterval::centered(y_hat, a, 1.0 - delta))
}

pub fn interval_normalized(
    y_hat: f64,
    norm: &NormalizationParams,
    calib: &CalibrationScores,
    delta: f64,
) -> Result<PredictionInterval> {
    check_finite("prediction", y_hat)?;
    let a = calib.critical_score(delta)?;
    Ok(PredictionInterval::centered(
        y_hat,
        a * norm.scale(),
        1.0 - delta,
    ))
}

/// `(#{i : alpha_i >= candidate} + 1) / (q + 1)`; the `+ 1` is the candidate
/// example itself.
pub fn p_value(candidate: NonconformityScore, calib: &CalibrationScores) -> f64 {
    let c = candidate.value();
    // scores are descending, so the ones >= c form a prefix
    let at_least = calib.scores.partition_point(|&s| s >= c);
    (at_least + 1) as f64 / (calib.q() + 1) as f64
}
