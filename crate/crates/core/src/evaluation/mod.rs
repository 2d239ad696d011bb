//! Point-prediction metrics, interval width statistics, empirical
//! miscoverage and the cross-validated experiment driver.

mod experiment;
mod metrics;
mod report;

pub use experiment::{
    run_experiment, run_experiment_detailed, ExperimentConfig, ExperimentOutcome, FoldOutcome,
    DEFAULT_DELTAS,
};
pub use metrics::{correlation, miscoverage, quantile_sorted, rmse, width_stats, WidthStats};
pub use report::{
    confidence_label, EvaluationReport, LevelReport, MeasureReport, ReportMetadata, REPORT_SCHEMA,
};

use thiserror::Error;

use crate::conformal::ConformalError;
use crate::data::DataError;
use crate::regressors::RegressorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type MetricResult<T> = std::result::Result<T, EvalError>;

/// Failure inside one (repeat, fold) of an experiment.
#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Regressor(#[from] RegressorError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("repeat {repeat}, fold {fold}: {source}")]
    Fold {
        repeat: usize,
        fold: usize,
        #[source]
        source: StageError,
    },
    #[error(transparent)]
    Evaluation(#[from] EvalError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
