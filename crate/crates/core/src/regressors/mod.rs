//! Underlying regressors: the tanh MLP point predictor and the linear model
//! of log absolute residuals used by the normalized measure.

mod mlp;
mod residual;

pub use mlp::{
    loss_and_gradient, train_mlp, train_mlp_detailed, MlpConfig, RestartOutcome, TrainedRegressor,
    TrainingReport,
};
pub use residual::{fit_residual_model, fit_residual_targets, ResidualModel, MIN_RESIDUAL};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressorError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged in all {0} restarts")]
    Diverged(usize),
    #[error(transparent)]
    Format(#[from] crate::textfmt::FormatError),
}

pub type Result<T> = std::result::Result<T, RegressorError>;

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(RegressorError::InvalidInput(format!(
            "expected {expected} attributes, got {}",
            x.len()
        )))
    }
}
