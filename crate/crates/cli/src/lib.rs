//! Command-line front end: cross-validated experiment runs, fitting a single
//! ICP to a dataset, and predicting intervals from a fitted artifact.

pub mod args;
pub mod artifact;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nnicp::conformal::{self, ConformalError, Measure};
use nnicp::data::{
    apply_scaling, fit_scaling, is_calibration_size_form, kfold_plan, load_csv, split_icp_indices,
    write_fold_indices, CsvOptions, DataError, Dataset, LabelColumn, SplitPlan,
};
use nnicp::evaluation::{
    run_experiment, EvaluationReport, ExperimentConfig, ExperimentError, StageError,
};
use nnicp::regressors::{fit_residual_model, train_mlp, MlpConfig, RegressorError, MIN_RESIDUAL};
use nnicp::seeds::{self, Stream};
use nnicp::CalibrationScores;

pub use artifact::{ArtifactError, IcpArtifact, PredictError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("incompatible model artifact: {0}")]
    Incompatible(String),
    #[error(
        "confidence {confidence} needs at least {min_q} calibration examples, the model has q = {q}; \
         refit with a larger --q or request a lower confidence"
    )]
    InsufficientCalibration {
        confidence: f64,
        q: usize,
        min_q: usize,
    },
}

impl CliError {
    /// 1 usage, 2 data, 3 numeric or training failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::InsufficientCalibration { .. } => 1,
            CliError::Data(_) | CliError::Incompatible(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<RegressorError> for CliError {
    fn from(e: RegressorError) -> Self {
        match e {
            RegressorError::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(m) => CliError::Usage(m),
            ExperimentError::Data(d) => d.into(),
            ExperimentError::Fold {
                source: StageError::Data(_),
                ..
            } => CliError::Data(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("cannot write {}: {e}", path.display()))
}

/// Significance level for a confidence level, rounded so that decimal
/// inputs such as 0.9 give exactly 0.1.
pub fn delta_for_confidence(confidence: f64) -> f64 {
    ((1.0 - confidence) * 1e12).round() / 1e12
}

fn check_levels(deltas: &[f64], q: usize) -> Result<(), CliError> {
    if deltas.is_empty() {
        return Err(CliError::Usage(
            "at least one significance level is required".into(),
        ));
    }
    for &delta in deltas {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(CliError::Usage(format!(
                "significance level {delta} must lie in (0, 1)"
            )));
        }
        match conformal::critical_index(delta, q) {
            Ok(_) => {}
            Err(ConformalError::InsufficientCalibration { min_q, .. }) => {
                return Err(CliError::InsufficientCalibration {
                    confidence: 1.0 - delta,
                    q,
                    min_q,
                })
            }
            Err(e) => return Err(CliError::Usage(e.to_string())),
        }
    }
    Ok(())
}

fn check_q_form(q: usize) -> Result<(), CliError> {
    if is_calibration_size_form(q) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--q {q} rejected: the calibration size must have the form 100n - 1 (99, 199, 299, ...)"
        )))
    }
}

fn check_beta(beta: f64) -> Result<(), CliError> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "beta must be a finite non-negative number, got {beta}"
        )))
    }
}

/// Shared network training options.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOptions {
    pub hidden_units: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub restarts: usize,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        let m = MlpConfig::default();
        Self {
            hidden_units: m.hidden_units,
            max_epochs: m.max_epochs,
            patience: m.patience,
            restarts: m.restarts,
        }
    }
}

impl TrainingOptions {
    fn mlp(&self, seed: u64) -> MlpConfig {
        MlpConfig {
            hidden_units: self.hidden_units,
            max_epochs: self.max_epochs,
            patience: self.patience,
            restarts: self.restarts,
            seed,
            ..MlpConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub label_column: LabelColumn,
    pub has_header: bool,
    pub k: usize,
    pub repeats: usize,
    pub q: usize,
    pub measures: Vec<Measure>,
    pub deltas: Vec<f64>,
    pub seed: u64,
    /// Directory receiving the report files; nothing is written when `None`.
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub training: TrainingOptions,
}

impl RunConfig {
    pub fn new(data: impl Into<PathBuf>) -> Self {
        Self {
            data: data.into(),
            label_column: LabelColumn::Last,
            has_header: false,
            k: 10,
            repeats: 10,
            q: 99,
            measures: vec![Measure::Absolute],
            deltas: nnicp::evaluation::DEFAULT_DELTAS.to_vec(),
            seed: 0,
            out: None,
            jobs: None,
            training: TrainingOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check_q_form(self.q)?;
        check_levels(&self.deltas, self.q)?;
        if self.measures.is_empty() {
            return Err(CliError::Usage("at least one measure is required".into()));
        }
        for m in &self.measures {
            if let Measure::Normalized { beta } = m {
                check_beta(*beta)?;
            }
        }
        if self.jobs == Some(0) {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        Ok(())
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load(path: &Path, label_column: &LabelColumn, has_header: bool) -> Result<Dataset, CliError> {
    let opts = CsvOptions {
        label_column: label_column.clone(),
        has_header,
    };
    let ds = load_csv(path, &opts).map_err(|e| match e {
        DataError::Io { .. } => CliError::Data(e.to_string()),
        other => CliError::Data(format!("{}: {other}", path.display())),
    })?;
    if ds.is_empty() {
        return Err(CliError::Data(format!("{}: no examples", path.display())));
    }
    Ok(ds)
}

/// Runs the cross-validated experiment and writes `report.txt`, `report.kv`,
/// `widths.csv` and `folds.txt` into `config.out` when set.
pub fn cmd_run(config: &RunConfig) -> Result<EvaluationReport, CliError> {
    config.validate()?;
    let ds = load(&config.data, &config.label_column, config.has_header)?;
    let plan = SplitPlan::new(config.k, config.repeats, config.q, config.seed);
    let mut exp = ExperimentConfig::new(
        config.training.mlp(config.seed),
        plan,
        config.measures.clone(),
    );
    exp.dataset_name = dataset_name(&config.data);
    exp.deltas = config.deltas.clone();
    exp.jobs = config.jobs;
    log::info!(
        "{}: {} examples, {} attributes, {} folds x {} repeats",
        exp.dataset_name,
        ds.len(),
        ds.n_attributes(),
        config.k,
        config.repeats
    );
    let report = run_experiment(&ds, &exp)?;

    if let Some(dir) = &config.out {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let folds = write_fold_indices(&kfold_plan(ds.len(), &plan)?);
        for (name, body) in [
            ("report.txt", report.to_table()),
            ("report.kv", report.to_kv()),
            ("widths.csv", report.boxplot_csv()),
            ("folds.txt", folds),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| io_error(&path, e))?;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub data: PathBuf,
    pub label_column: LabelColumn,
    pub has_header: bool,
    pub q: usize,
    pub measure: Measure,
    pub seed: u64,
    pub out: PathBuf,
    pub training: TrainingOptions,
}

/// Fits scaling, network, residual model (normalized measure only) and
/// calibration scores on the whole dataset and writes the artifact.
pub fn cmd_fit(config: &FitConfig) -> Result<IcpArtifact, CliError> {
    check_q_form(config.q)?;
    if let Measure::Normalized { beta } = config.measure {
        check_beta(beta)?;
    }
    let raw = load(&config.data, &config.label_column, config.has_header)?;
    if config.q >= raw.len() {
        return Err(CliError::Data(format!(
            "q = {} leaves no proper training examples out of {}",
            config.q,
            raw.len()
        )));
    }
    let scaling = fit_scaling(&raw);
    let ds = apply_scaling(&scaling, &raw);
    let split_seed = seeds::derive(config.seed, Stream::CalibrationSplit, 0);
    let (proper_idx, calib_idx) = split_icp_indices(ds.len(), config.q, split_seed)?;
    let proper = ds.subset(&proper_idx);
    let calib = ds.subset(&calib_idx);

    let network = train_mlp(
        &proper,
        &config
            .training
            .mlp(seeds::derive(config.seed, Stream::Training, 0)),
    )?;
    let residual = if config.measure.is_normalized() {
        Some(fit_residual_model(&proper, &network, MIN_RESIDUAL)?)
    } else {
        None
    };
    let predictions = network.predict_all(&calib)?;
    let mut scores = Vec::with_capacity(calib.len());
    for ((x, &y), &y_hat) in calib.rows().zip(calib.labels()).zip(&predictions) {
        let score = match config.measure {
            Measure::Absolute => conformal::score_absolute(y, y_hat),
            Measure::Normalized { beta } => {
                let mu = residual.as_ref().expect("fitted above").predict_mu(x)?;
                conformal::NormalizationParams::new(beta, mu)
                    .and_then(|n| conformal::score_normalized(y, y_hat, &n))
            }
        }
        .map_err(|e| CliError::Numeric(e.to_string()))?;
        scores.push(score);
    }
    let calibration =
        CalibrationScores::new(scores).map_err(|e| CliError::Numeric(e.to_string()))?;

    let artifact = IcpArtifact {
        measure: config.measure,
        scaling,
        network,
        residual,
        calibration,
        calibration_rows: calib_idx,
    };
    std::fs::write(&config.out, artifact.to_text()).map_err(|e| io_error(&config.out, e))?;
    Ok(artifact)
}

pub fn load_artifact(path: &Path) -> Result<IcpArtifact, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    IcpArtifact::from_text(&text)
        .map_err(|e| CliError::Incompatible(format!("{}: {e}", path.display())))
}

/// Where `cmd_predict` takes its feature vectors from.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictInput {
    Features(Vec<f64>),
    /// Attribute-only CSV.
    Csv {
        path: PathBuf,
        has_header: bool,
    },
    /// CSV with a label column; predictions are scored for coverage.
    LabeledCsv {
        path: PathBuf,
        has_header: bool,
        label_column: LabelColumn,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictConfig {
    pub model: PathBuf,
    pub input: PredictInput,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRow {
    pub lower: f64,
    pub prediction: f64,
    pub upper: f64,
    pub label: Option<f64>,
}

impl PredictionRow {
    pub fn covered(&self) -> Option<bool> {
        self.label.map(|y| self.lower <= y && y <= self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictOutput {
    pub rows: Vec<PredictionRow>,
}

impl PredictOutput {
    pub fn to_csv(&self) -> String {
        let labeled = self.rows.first().is_some_and(|r| r.label.is_some());
        let mut out = String::from(if labeled {
            "lower,prediction,upper,label,covered\n"
        } else {
            "lower,prediction,upper\n"
        });
        for r in &self.rows {
            let _ = write!(out, "{},{},{}", r.lower, r.prediction, r.upper);
            if let (Some(y), Some(c)) = (r.label, r.covered()) {
                let _ = write!(out, ",{y},{c}");
            }
            out.push('\n');
        }
        out
    }

    /// Percentage of labeled rows outside their interval.
    pub fn error_percentage(&self) -> Option<f64> {
        let flags: Vec<bool> = self
            .rows
            .iter()
            .filter_map(PredictionRow::covered)
            .collect();
        (!flags.is_empty())
            .then(|| 100.0 * flags.iter().filter(|c| !**c).count() as f64 / flags.len() as f64)
    }
}

fn read_feature_csv(path: &Path, has_header: bool) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 1 + usize::from(has_header);
        let record =
            record.map_err(|e| CliError::Data(format!("{}: line {line}: {e}", path.display())))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        CliError::Data(format!(
                            "{}: line {line}, column {}: not a finite number: {cell:?}",
                            path.display(),
                            j + 1
                        ))
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Intervals for every input row at `config.confidence`; never retrains.
pub fn cmd_predict(config: &PredictConfig) -> Result<PredictOutput, CliError> {
    if !(config.confidence > 0.0 && config.confidence < 1.0) {
        return Err(CliError::Usage(format!(
            "confidence {} must lie in (0, 1)",
            config.confidence
        )));
    }
    let artifact = load_artifact(&config.model)?;
    let delta = delta_for_confidence(config.confidence);
    check_levels(&[delta], artifact.calibration.q())?;

    let (rows, labels): (Vec<Vec<f64>>, Vec<Option<f64>>) = match &config.input {
        PredictInput::Features(x) => (vec![x.clone()], vec![None]),
        PredictInput::Csv { path, has_header } => {
            let rows = read_feature_csv(path, *has_header)?;
            let n = rows.len();
            (rows, vec![None; n])
        }
        PredictInput::LabeledCsv {
            path,
            has_header,
            label_column,
        } => {
            let ds = load(path, label_column, *has_header)?;
            (
                ds.rows().map(<[f64]>::to_vec).collect(),
                ds.labels().iter().map(|&y| Some(y)).collect(),
            )
        }
    };

    let out = rows
        .iter()
        .zip(labels)
        .map(|(x, label)| match artifact.predict(x, delta) {
            Ok((prediction, iv)) => Ok(PredictionRow {
                lower: iv.lower,
                prediction,
                upper: iv.upper,
                label,
            }),
            Err(PredictError::Dimension { expected, found }) => Err(CliError::Incompatible(
                format!("model expects {expected} attributes, input row has {found}"),
            )),
            Err(e) => Err(CliError::Numeric(e.to_string())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PredictOutput { rows: out })
}
