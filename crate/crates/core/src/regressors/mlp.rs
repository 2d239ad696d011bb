//! Two-layer regression network: a tanh hidden layer and one linear output
//! neuron, trained with Levenberg-Marquardt (damped Gauss-Newton) steps on the
//! squared error, early stopping on a held-out validation subset and
//! best-of-N random restarts.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use super::{check_dim, RegressorError, Result};
use crate::data::Dataset;
use crate::seeds::{self, Stream};
use crate::textfmt::{RecordReader, RecordWriter};

const FORMAT_HEADER: &str = "nnicp-mlp v1";

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_DEC: f64 = 0.1;
const LAMBDA_INC: f64 = 10.0;
const LAMBDA_MAX: f64 = 1e10;
const MIN_GRADIENT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden_units: usize,
    pub max_epochs: usize,
    pub restarts: usize,
    /// Fraction of the proper training set held out for early stopping.
    pub validation_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_units: 8,
            max_epochs: 300,
            restarts: 10,
            validation_fraction: 0.1,
            patience: 20,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RegressorError::InvalidConfig(m.to_string()));
        if self.hidden_units == 0 {
            return bad("hidden_units must be >= 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be >= 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1");
        }
        if self.patience == 0 {
            return bad("patience must be >= 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Frozen network. Parameters are stored flat in the order
/// hidden weights (row per hidden unit), hidden biases, output weights,
/// output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRegressor {
    input_dim: usize,
    hidden_units: usize,
    params: Vec<f64>,
}

impl TrainedRegressor {
    pub fn new(
        input_dim: usize,
        hidden_units: usize,
        hidden_weights: &[f64],
        hidden_biases: &[f64],
        output_weights: &[f64],
        output_bias: f64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_units == 0 {
            return Err(RegressorError::InvalidInput(
                "input_dim and hidden_units must be positive".to_string(),
            ));
        }
        if hidden_weights.len() != input_dim * hidden_units
            || hidden_biases.len() != hidden_units
            || output_weights.len() != hidden_units
        {
            return Err(RegressorError::InvalidInput(
                "parameter array lengths do not match the architecture".to_string(),
            ));
        }
        let params = [
            hidden_weights,
            hidden_biases,
            output_weights,
            std::slice::from_ref(&output_bias),
        ]
        .concat();
        Self::from_params(input_dim, hidden_units, params)
    }

    fn from_params(input_dim: usize, hidden_units: usize, params: Vec<f64>) -> Result<Self> {
        debug_assert_eq!(params.len(), param_count(input_dim, hidden_units));
        if params.iter().any(|p| !p.is_finite()) {
            return Err(RegressorError::InvalidInput(
                "network parameters must be finite".to_string(),
            ));
        }
        Ok(Self {
            input_dim,
            hidden_units,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_units
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn hidden_weights(&self) -> &[f64] {
        &self.params[..self.hidden_units * self.input_dim]
    }

    pub fn hidden_biases(&self) -> &[f64] {
        let o = self.hidden_units * self.input_dim;
        &self.params[o..o + self.hidden_units]
    }

    pub fn output_weights(&self) -> &[f64] {
        let o = self.hidden_units * (self.input_dim + 1);
        &self.params[o..o + self.hidden_units]
    }

    pub fn output_bias(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim, x)?;
        Ok(forward(
            &self.params,
            self.input_dim,
            self.hidden_units,
            x,
            None,
        ))
    }

    pub fn predict_all(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if !ds.is_empty() && ds.n_attributes() != self.input_dim {
            return Err(RegressorError::InvalidInput(format!(
                "expected {} attributes, got {}",
                self.input_dim,
                ds.n_attributes()
            )));
        }
        Ok(ds
            .rows()
            .map(|x| forward(&self.params, self.input_dim, self.hidden_units, x, None))
            .collect())
    }

    pub fn to_text(&self) -> String {
        RecordWriter::new()
            .line(FORMAT_HEADER)
            .usize("input_dim", self.input_dim)
            .usize("hidden_units", self.hidden_units)
            .f64s("hidden_weights", self.hidden_weights())
            .f64s("hidden_biases", self.hidden_biases())
            .f64s("output_weights", self.output_weights())
            .f64s("output_bias", &[self.output_bias()])
            .finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read(&mut RecordReader::new(text))
    }

    pub fn read(r: &mut RecordReader<'_>) -> Result<Self> {
        r.expect_line(FORMAT_HEADER)?;
        let d = r.usize("input_dim")?;
        let h = r.usize("hidden_units")?;
        let w = r.f64s_len("hidden_weights", d * h)?;
        let b = r.f64s_len("hidden_biases", h)?;
        let v = r.f64s_len("output_weights", h)?;
        let c = r.f64s_len("output_bias", 1)?;
        Self::new(d, h, &w, &b, &v, c[0])
    }
}

fn param_count(d: usize, h: usize) -> usize {
    h * (d + 2) + 1
}

/// Network output; fills `hidden` with tanh activations when given.
fn forward(params: &[f64], d: usize, h: usize, x: &[f64], mut hidden: Option<&mut [f64]>) -> f64 {
    let (w, rest) = params.split_at(h * d);
    let (b, rest) = rest.split_at(h);
    let (v, c) = rest.split_at(h);
    let mut out = c[0];
    for j in 0..h {
        let z = b[j]
            + w[j * d..(j + 1) * d]
                .iter()
                .zip(x)
                .map(|(wk, xk)| wk * xk)
                .sum::<f64>();
        let a = z.tanh();
        if let Some(buf) = hidden.as_deref_mut() {
            buf[j] = a;
        }
        out += v[j] * a;
    }
    out
}

/// d(output)/d(params) for one example given its hidden activations.
fn output_gradient(params: &[f64], d: usize, h: usize, x: &[f64], hidden: &[f64], g: &mut [f64]) {
    let v = &params[h * (d + 1)..h * (d + 2)];
    for j in 0..h {
        let delta = v[j] * (1.0 - hidden[j] * hidden[j]);
        for k in 0..d {
            g[j * d + k] = delta * x[k];
        }
        g[h * d + j] = delta;
        g[h * (d + 1) + j] = hidden[j];
    }
    g[h * (d + 2)] = 1.0;
}

fn sse(params: &[f64], d: usize, h: usize, xs: &[f64], ys: &[f64]) -> f64 {
    ys.iter()
        .enumerate()
        .map(|(i, &y)| {
            let r = forward(params, d, h, &xs[i * d..(i + 1) * d], None) - y;
            r * r
        })
        .sum()
}

/// Mean squared error of `model` on `ds` and its gradient with respect to
/// the flat parameter vector.
pub fn loss_and_gradient(model: &TrainedRegressor, ds: &Dataset) -> Result<(f64, Vec<f64>)> {
    if ds.is_empty() || ds.n_attributes() != model.input_dim {
        return Err(RegressorError::InvalidInput(
            "dataset is empty or does not match the network input".to_string(),
        ));
    }
    let (d, h) = (model.input_dim, model.hidden_units);
    let p = &model.params;
    let mut hidden = vec![0.0; h];
    let mut g = vec![0.0; p.len()];
    let mut grad = vec![0.0; p.len()];
    let mut loss = 0.0;
    let n = ds.len() as f64;
    for (x, &y) in ds.rows().zip(ds.labels()) {
        let r = forward(p, d, h, x, Some(&mut hidden)) - y;
        output_gradient(p, d, h, x, &hidden, &mut g);
        loss += r * r;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += 2.0 * r * gi / n;
        }
    }
    Ok((loss / n, grad))
}

/// Outcome of one random restart.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub restart: usize,
    pub seed: u64,
    /// `None` when the restart diverged.
    pub validation_mse: Option<f64>,
    /// Mean squared training error at initialization, label units squared.
    pub initial_loss: f64,
    /// Mean squared training error of the returned weights.
    pub final_loss: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub model: TrainedRegressor,
    pub selected: usize,
    pub restarts: Vec<RestartOutcome>,
}

pub fn train_mlp(proper_training: &Dataset, config: &MlpConfig) -> Result<TrainedRegressor> {
    train_mlp_detailed(proper_training, config).map(|r| r.model)
}

/// Trains `config.restarts` networks from independent initializations and
/// keeps the one with the lowest validation MSE (ties: lowest restart index).
pub fn train_mlp_detailed(proper_training: &Dataset, config: &MlpConfig) -> Result<TrainingReport> {
    config.validate()?;
    let n = proper_training.len();
    if n < 10 {
        return Err(RegressorError::InvalidInput(format!(
            "need at least 10 training examples, got {n}"
        )));
    }
    if proper_training.n_attributes() == 0 {
        return Err(RegressorError::InvalidInput("no attributes".to_string()));
    }

    let n_val = ((n as f64 * config.validation_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeds::rng(seeds::derive(
        config.seed,
        Stream::Validation,
        0,
    )));
    let (val_idx, train_idx) = order.split_at(n_val);

    // Labels are standardized for conditioning; the output layer is mapped
    // back to label units afterwards.
    let labels = proper_training.labels();
    let mean = labels.iter().sum::<f64>() / n as f64;
    let var = labels.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let split = |idx: &[usize]| -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(idx.len() * proper_training.n_attributes());
        let mut ys = Vec::with_capacity(idx.len());
        for &i in idx {
            xs.extend_from_slice(proper_training.row(i));
            ys.push((labels[i] - mean) / scale);
        }
        (xs, ys)
    };
    let train = split(train_idx);
    let val = split(val_idx);
    let d = proper_training.n_attributes();
    let h = config.hidden_units;

    let runs: Vec<Option<(Vec<f64>, RestartOutcome)>> = (0..config.restarts)
        .into_par_iter()
        .map(|restart| {
            let seed = seeds::derive(config.seed, Stream::Training, restart as u64);
            train_one(d, h, &train, &val, config, seed).map(|(params, mut outcome)| {
                outcome.restart = restart;
                outcome.initial_loss *= scale * scale;
                outcome.final_loss *= scale * scale;
                outcome.validation_mse = outcome.validation_mse.map(|m| m * scale * scale);
                (params, outcome)
            })
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, run) in runs.iter().enumerate() {
        if let Some((_, o)) = run {
            let mse = o.validation_mse.unwrap_or(f64::INFINITY);
            if best.is_none_or(|(_, b)| mse < b) {
                best = Some((i, mse));
            }
        }
    }
    let Some((selected, _)) = best else {
        return Err(RegressorError::Diverged(config.restarts));
    };
    let restarts: Vec<RestartOutcome> = runs
        .iter()
        .enumerate()
        .map(|(i, run)| match run {
            Some((_, o)) => o.clone(),
            None => RestartOutcome {
                restart: i,
                seed: seeds::derive(config.seed, Stream::Training, i as u64),
                validation_mse: None,
                initial_loss: f64::NAN,
                final_loss: f64::NAN,
                epochs: 0,
            },
        })
        .collect();

    let mut params = runs[selected].as_ref().map(|(p, _)| p.clone()).unwrap();
    let out = h * (d + 1);
    for v in &mut params[out..out + h] {
        *v *= scale;
    }
    let c = params.len() - 1;
    params[c] = params[c] * scale + mean;
    let model = TrainedRegressor::from_params(d, h, params)
        .map_err(|_| RegressorError::Diverged(config.restarts))?;
    Ok(TrainingReport {
        model,
        selected,
        restarts,
    })
}

fn init_params(d: usize, h: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeds::rng(seed);
    let mut params = vec![0.0; param_count(d, h)];
    let in_bound = 1.0 / (d as f64).sqrt();
    let out_bound = 1.0 / (h as f64).sqrt();
    for p in &mut params[..h * (d + 1)] {
        *p = rng.random_range(-in_bound..=in_bound);
    }
    for p in &mut params[h * (d + 1)..] {
        *p = rng.random_range(-out_bound..=out_bound);
    }
    params
}

/// One Levenberg-Marquardt run; `None` if the loss becomes non-finite.
fn train_one(
    d: usize,
    h: usize,
    (xs, ys): &(Vec<f64>, Vec<f64>),
    (vx, vy): &(Vec<f64>, Vec<f64>),
    config: &MlpConfig,
    seed: u64,
) -> Option<(Vec<f64>, RestartOutcome)> {
    let n = ys.len();
    let np = param_count(d, h);
    let mut params = init_params(d, h, seed);
    let mut loss = sse(&params, d, h, xs, ys);
    if !loss.is_finite() {
        return None;
    }
    let initial_loss = loss / n as f64;

    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut stale = 0;
    let mut lambda = LAMBDA_INIT;
    let mut epochs = 0;
    let mut hidden = vec![0.0; h];
    let mut jt = DMatrix::<f64>::zeros(np, n);
    let mut resid = DVector::<f64>::zeros(n);

    'epochs: while epochs < config.max_epochs {
        for i in 0..n {
            let x = &xs[i * d..(i + 1) * d];
            resid[i] = forward(&params, d, h, x, Some(&mut hidden)) - ys[i];
            // column-major: column i is contiguous
            let col = &mut jt.as_mut_slice()[i * np..(i + 1) * np];
            output_gradient(&params, d, h, x, &hidden, col);
        }
        let jtj = &jt * jt.transpose();
        let grad = &jt * &resid;
        if grad.amax() < MIN_GRADIENT {
            break;
        }
        loop {
            let mut system = jtj.clone();
            for k in 0..np {
                system[(k, k)] += lambda;
            }
            let step = system.cholesky().map(|c| c.solve(&(-&grad)));
            if let Some(step) = step {
                let candidate: Vec<f64> =
                    params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
                let cand_loss = sse(&candidate, d, h, xs, ys);
                if cand_loss.is_finite() && cand_loss < loss {
                    params = candidate;
                    loss = cand_loss;
                    lambda = (lambda * LAMBDA_DEC).max(1e-20);
                    break;
                }
            }
            lambda *= LAMBDA_INC;
            if lambda > LAMBDA_MAX {
                break 'epochs;
            }
        }
        epochs += 1;

        let val_mse = sse(&params, d, h, vx, vy) / vy.len() as f64;
        if !val_mse.is_finite() {
            return None;
        }
        match &best {
            Some((b, _, _)) if val_mse >= *b => {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
            _ => {
                best = Some((val_mse, params.clone(), loss));
                stale = 0;
            }
        }
    }

    let (val_mse, params, final_sse) = match best {
        Some(b) => b,
        None => {
            let v = sse(&params, d, h, vx, vy) / vy.len() as f64;
            (v, params, loss)
        }
    };
    if !val_mse.is_finite() {
        return None;
    }
    Some((
        params,
        RestartOutcome {
            restart: 0,
            seed,
            validation_mse: Some(val_mse),
            initial_loss,
            final_loss: final_sse / n as f64,
            epochs,
        },
    ))
}
