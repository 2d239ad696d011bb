//! Fitted ICP artifact: attribute scaling, network, optional residual model
//! and sorted calibration scores, stored as one versioned text record.

use nnicp::conformal::{
    self, CalibrationScores, ConformalError, Measure, NormalizationParams, PredictionInterval,
};
use nnicp::regressors::{RegressorError, ResidualModel, TrainedRegressor};
use nnicp::textfmt::{FormatError, RecordReader, RecordWriter};
use nnicp::ScalingParams;

pub const ARTIFACT_HEADER: &str = "nnicp-icp v1";

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Regressor(#[from] RegressorError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpArtifact {
    pub measure: Measure,
    pub scaling: ScalingParams,
    pub network: TrainedRegressor,
    /// Present exactly when `measure` is normalized.
    pub residual: Option<ResidualModel>,
    pub calibration: CalibrationScores,
    /// Rows of the fitting dataset used for calibration, ascending.
    pub calibration_rows: Vec<usize>,
}

impl IcpArtifact {
    pub fn n_attributes(&self) -> usize {
        self.scaling.n_attributes()
    }

    /// Point prediction and interval for one raw (unscaled) feature vector.
    pub fn predict(
        &self,
        features: &[f64],
        delta: f64,
    ) -> Result<(f64, PredictionInterval), PredictError> {
        if features.len() != self.n_attributes() {
            return Err(PredictError::Dimension {
                expected: self.n_attributes(),
                found: features.len(),
            });
        }
        let x = self.scaling.scale_row(features);
        let y_hat = self.network.predict(&x)?;
        let iv = match self.measure {
            Measure::Absolute => conformal::interval_absolute(y_hat, &self.calibration, delta)?,
            Measure::Normalized { beta } => {
                let mu = self
                    .residual
                    .as_ref()
                    .expect("checked on load")
                    .predict_mu(&x)?;
                let norm = NormalizationParams::new(beta, mu)?;
                conformal::interval_normalized(y_hat, &norm, &self.calibration, delta)?
            }
        };
        Ok((y_hat, iv))
    }

    pub fn to_text(&self) -> String {
        let mut w = RecordWriter::new();
        w.line(ARTIFACT_HEADER);
        match self.measure {
            Measure::Absolute => w.str("measure", "absolute"),
            Measure::Normalized { beta } => w.str("measure", "normalized").f64s("beta", &[beta]),
        };
        let (lo, hi): (Vec<f64>, Vec<f64>) = self.scaling.ranges().iter().copied().unzip();
        w.usize("n_attributes", self.n_attributes())
            .f64s("scaling_min", &lo)
            .f64s("scaling_max", &hi);
        let mut out = w.finish();
        out.push_str(&self.network.to_text());
        if let Some(r) = &self.residual {
            out.push_str(&r.to_text());
        }
        let rows: Vec<String> = self.calibration_rows.iter().map(usize::to_string).collect();
        out.push_str(
            &RecordWriter::new()
                .usize("q", self.calibration.q())
                .f64s("calibration_scores", self.calibration.scores())
                .str("calibration_rows", &rows.join(" "))
                .finish(),
        );
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ArtifactError> {
        let mut r = RecordReader::new(text);
        r.expect_line(ARTIFACT_HEADER)?;
        let measure = match r.str("measure")?.as_str() {
            "absolute" => Measure::Absolute,
            "normalized" => Measure::Normalized {
                beta: r.f64s_len("beta", 1)?[0],
            },
            other => return Err(ArtifactError::Invalid(format!("unknown measure {other:?}"))),
        };
        let d = r.usize("n_attributes")?;
        let lo = r.f64s_len("scaling_min", d)?;
        let hi = r.f64s_len("scaling_max", d)?;
        let scaling = ScalingParams::from_ranges(lo.into_iter().zip(hi).collect())
            .ok_or_else(|| ArtifactError::Invalid("invalid scaling ranges".into()))?;
        let network = TrainedRegressor::read(&mut r)?;
        let residual = if r.peek_key() == Some("nnicp-residual") {
            Some(ResidualModel::read(&mut r)?)
        } else {
            None
        };
        let q = r.usize("q")?;
        let scores = r.f64s_len("calibration_scores", q)?;
        let rows = r
            .str("calibration_rows")?
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ArtifactError::Invalid(format!("calibration_rows: {e}")))?;

        if network.input_dim() != d {
            return Err(ArtifactError::Invalid(format!(
                "network expects {} attributes, scaling has {d}",
                network.input_dim()
            )));
        }
        match (&measure, &residual) {
            (Measure::Normalized { .. }, None) => {
                return Err(ArtifactError::Invalid(
                    "normalized measure without residual model".into(),
                ))
            }
            (Measure::Absolute, Some(_)) => {
                return Err(ArtifactError::Invalid(
                    "residual model with absolute measure".into(),
                ))
            }
            (_, Some(res)) if res.input_dim() != d => {
                return Err(ArtifactError::Invalid(
                    "residual model dimension mismatch".into(),
                ))
            }
            _ => {}
        }
        if rows.len() != q {
            return Err(ArtifactError::Invalid(
                "calibration_rows length differs from q".into(),
            ));
        }
        let calibration = CalibrationScores::from_values(&scores)
            .map_err(|e| ArtifactError::Invalid(e.to_string()))?;
        Ok(Self {
            measure,
            scaling,
            network,
            residual,
            calibration,
            calibration_rows: rows,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("model expects {expected} attributes, input has {found}")]
    Dimension { expected: usize, found: usize },
    #[error(transparent)]
    Regressor(#[from] RegressorError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
}
