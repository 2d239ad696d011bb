//! Linear model of the log absolute residual of the underlying network,
//! supplying `mu` for the normalized nonconformity measure.
//!
//! A linear network trained to convergence on squared loss is ordinary least
//! squares, so the fit is done in closed form: attributes and targets are
//! centered, the normal equations are solved with a tiny ridge term on the
//! weights (never on the intercept) and the intercept restores the means.

use nalgebra::{DMatrix, DVector};

use super::{check_dim, RegressorError, Result, TrainedRegressor};
use crate::data::Dataset;
use crate::textfmt::{RecordReader, RecordWriter};

const FORMAT_HEADER: &str = "nnicp-residual v1";

/// Residuals below this (label units) are clamped before taking logs.
pub const MIN_RESIDUAL: f64 = 1e-6;

const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualModel {
    weights: Vec<f64>,
    bias: f64,
}

impl ResidualModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().chain([&bias]).any(|v| !v.is_finite()) {
            return Err(RegressorError::InvalidInput(
                "residual model needs finite weights for at least one attribute".to_string(),
            ));
        }
        Ok(Self { weights, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Predicted `ln |y - y_hat|` for `x`.
    pub fn predict_mu(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.weights.len(), x)?;
        Ok(self.bias + self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
    }

    pub fn to_text(&self) -> String {
        RecordWriter::new()
            .line(FORMAT_HEADER)
            .usize("input_dim", self.weights.len())
            .f64s("weights", &self.weights)
            .f64s("bias", &[self.bias])
            .finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read(&mut RecordReader::new(text))
    }

    pub fn read(r: &mut RecordReader<'_>) -> Result<Self> {
        r.expect_line(FORMAT_HEADER)?;
        let d = r.usize("input_dim")?;
        let weights = r.f64s_len("weights", d)?;
        let bias = r.f64s_len("bias", 1)?;
        Self::new(weights, bias[0])
    }
}

/// Fits `ln(max(|y - y_hat|, min_residual))` on the attributes of
/// `proper_training`, where `y_hat` comes from `model`.
pub fn fit_residual_model(
    proper_training: &Dataset,
    model: &TrainedRegressor,
    min_residual: f64,
) -> Result<ResidualModel> {
    if !(min_residual > 0.0 && min_residual.is_finite()) {
        return Err(RegressorError::InvalidInput(format!(
            "min_residual must be positive, got {min_residual}"
        )));
    }
    let predictions = model.predict_all(proper_training)?;
    let targets: Vec<f64> = predictions
        .iter()
        .zip(proper_training.labels())
        .map(|(p, y)| (y - p).abs().max(min_residual).ln())
        .collect();
    fit_residual_targets(proper_training, &targets)
}

/// Least-squares linear fit with intercept of `targets` on the attributes.
pub fn fit_residual_targets(ds: &Dataset, targets: &[f64]) -> Result<ResidualModel> {
    let n = ds.len();
    let d = ds.n_attributes();
    if n == 0 || d == 0 || targets.len() != n {
        return Err(RegressorError::InvalidInput(
            "residual fit needs a nonempty dataset and one target per row".to_string(),
        ));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(RegressorError::InvalidInput(
            "non-finite residual target".to_string(),
        ));
    }

    let mut x_mean = vec![0.0; d];
    for row in ds.rows() {
        for (m, x) in x_mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n as f64);
    let t_mean = targets.iter().sum::<f64>() / n as f64;

    let centered = DMatrix::from_fn(n, d, |i, j| ds.row(i)[j] - x_mean[j]);
    let t = DVector::from_iterator(n, targets.iter().map(|t| t - t_mean));
    let mut gram = centered.tr_mul(&centered);
    for k in 0..d {
        gram[(k, k)] += RIDGE;
    }
    let rhs = centered.tr_mul(&t);
    let w = gram
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(d));

    let weights: Vec<f64> = w.iter().copied().collect();
    let bias = t_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    ResidualModel::new(weights, bias)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_dataset(labels: impl Fn(f64, f64) -> f64) -> Dataset {
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for i in 0..20 {
            for j in 0..5 {
                let x = (i as f64) / 10.0 - 1.0;
                let z = (j as f64) / 2.0 - 1.0;
                rows.push(vec![x, z]);
                ys.push(labels(x, z));
            }
        }
        Dataset::from_rows(&rows, ys).unwrap()
    }

    fn constant_net(c: f64) -> TrainedRegressor {
        TrainedRegressor::new(2, 1, &[0.0, 0.0], &[0.0], &[0.0], c).unwrap()
    }

    #[test]
    fn zero_weights_give_bias() {
        let m = ResidualModel::new(vec![0.0, 0.0], -1.5).unwrap();
        assert_eq!(m.predict_mu(&[3.0, 4.0]).unwrap(), -1.5);
    }

    #[test]
    fn linear_forward() {
        let m = ResidualModel::new(vec![1.0, 0.0, 0.0], 0.25).unwrap();
        assert_eq!(m.predict_mu(&[2.0, 0.0, 0.0]).unwrap(), 2.25);
        assert!(m.predict_mu(&[2.0]).is_err());
    }

    #[test]
    fn equal_residuals_give_constant_model() {
        // labels 3 everywhere, network predicts 1 -> residual 2
        let ds = grid_dataset(|_, _| 3.0);
        let m = fit_residual_model(&ds, &constant_net(1.0), MIN_RESIDUAL).unwrap();
        assert!(m.weights().iter().all(|w| w.abs() < 1e-9));
        assert!((m.bias() - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn zero_residual_is_clamped() {
        let ds = grid_dataset(|_, _| 1.0);
        let m = fit_residual_model(&ds, &constant_net(1.0), 1e-6).unwrap();
        assert!((m.bias() - 1e-6f64.ln()).abs() < 1e-9);
        assert!(fit_residual_model(&ds, &constant_net(1.0), 0.0).is_err());
    }

    #[test]
    fn constant_attribute_column_is_harmless() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 30.0, 0.0]).collect();
        let ds = Dataset::from_rows(&rows, vec![0.0; 30]).unwrap();
        let targets: Vec<f64> = (0..30).map(|i| 2.0 * i as f64 / 30.0 + 1.0).collect();
        let m = fit_residual_targets(&ds, &targets).unwrap();
        assert!((m.weights()[0] - 2.0).abs() < 1e-6);
        assert_eq!(m.weights()[1], 0.0);
    }

    #[test]
    fn text_round_trip() {
        let m = ResidualModel::new(vec![0.3, -1.0 / 3.0], 1e-7).unwrap();
        assert_eq!(ResidualModel::from_text(&m.to_text()).unwrap(), m);
    }
}
