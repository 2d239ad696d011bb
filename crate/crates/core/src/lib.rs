//! Inductive conformal prediction for regression with neural-network
//! underlying models.
//!
//! The underlying network is trained on a proper training set; the
//! nonconformity scores of a held-out calibration set then turn each point
//! prediction into an interval with a guaranteed long-run miscoverage rate.
//! Two nonconformity measures are provided: the absolute residual and a
//! normalized residual that divides by a predicted difficulty
//! `exp(mu) + beta`, where `mu` comes from a linear model of the log
//! residuals.
//!
//! ```
//! use nnicp::conformal::{interval_absolute, score_absolute, CalibrationScores};
//!
//! let scores: Vec<_> = [(5.0, 4.1), (2.0, 2.5), (7.0, 6.2), (1.0, 1.9)]
//!     .iter()
//!     .map(|&(y, y_hat)| score_absolute(y, y_hat).unwrap())
//!     .collect();
//! let calib = CalibrationScores::new(scores).unwrap();
//! // s = floor(0.4 * 5) = 2: the second largest calibration score
//! let iv = interval_absolute(3.0, &calib, 0.4).unwrap();
//! assert!((iv.upper - iv.lower - 2.0 * 0.9).abs() < 1e-12);
//! ```

pub mod conformal;
pub mod data;
pub mod evaluation;
pub mod regressors;
pub mod seeds;
pub mod textfmt;

pub use conformal::{CalibrationScores, Measure, NonconformityScore, PredictionInterval};
pub use data::{Dataset, ScalingParams, SplitPlan};
pub use evaluation::{run_experiment, EvaluationReport, ExperimentConfig};
pub use regressors::{MlpConfig, ResidualModel, TrainedRegressor};
