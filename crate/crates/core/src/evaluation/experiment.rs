//! Cross-validated ICP experiment: for every (repeat, fold) the training
//! fold is scaled, split into proper training and calibration sets, the
//! network (and, for normalized measures, the residual model) is trained,
//! and intervals are produced for every test example at every significance
//! level. Results are pooled over all test predictions.

use rayon::prelude::*;

use super::metrics::{correlation, miscoverage, rmse, width_stats};
use super::report::{EvaluationReport, LevelReport, MeasureReport, ReportMetadata};
use super::{EvalError, ExperimentError, Result, StageError};
use crate::conformal::{self, CalibrationScores, Measure, NormalizationParams, PredictionInterval};
use crate::data::{apply_scaling, fit_scaling, kfold_plan, split_icp, Dataset, SplitPlan};
use crate::regressors::{fit_residual_model, train_mlp, MlpConfig, ResidualModel, MIN_RESIDUAL};
use crate::seeds::{self, Stream};

pub const DEFAULT_DELTAS: [f64; 3] = [0.10, 0.05, 0.01];

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset_name: String,
    /// Network settings; `seed` is replaced per fold by a value derived from
    /// `plan.seed`.
    pub mlp: MlpConfig,
    pub plan: SplitPlan,
    pub measures: Vec<Measure>,
    pub deltas: Vec<f64>,
    pub min_residual: f64,
    /// Cap on concurrently executing folds; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(mlp: MlpConfig, plan: SplitPlan, measures: Vec<Measure>) -> Self {
        Self {
            dataset_name: "dataset".to_string(),
            mlp,
            plan,
            measures,
            deltas: DEFAULT_DELTAS.to_vec(),
            min_residual: MIN_RESIDUAL,
            jobs: None,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        self.plan.validate(n)?;
        self.mlp
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        if self.measures.is_empty() {
            return Err(ExperimentError::Config(
                "no nonconformity measure selected".into(),
            ));
        }
        if self.deltas.is_empty() {
            return Err(ExperimentError::Config(
                "no significance level given".into(),
            ));
        }
        for m in &self.measures {
            if let Measure::Normalized { beta } = m {
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(ExperimentError::Config(format!("invalid beta {beta}")));
                }
            }
        }
        for &delta in &self.deltas {
            conformal::critical_index(delta, self.plan.q)
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Everything one (repeat, fold) produced.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub repeat: usize,
    pub fold: usize,
    /// Dataset row indices of the test examples, ascending.
    pub test_indices: Vec<usize>,
    pub labels: Vec<f64>,
    pub predictions: Vec<f64>,
    /// `intervals[measure][delta][example]`, in config order.
    pub intervals: Vec<Vec<Vec<PredictionInterval>>>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: EvaluationReport,
    pub folds: Vec<FoldOutcome>,
}

pub fn run_experiment(dataset: &Dataset, config: &ExperimentConfig) -> Result<EvaluationReport> {
    run_experiment_detailed(dataset, config).map(|o| o.report)
}

pub fn run_experiment_detailed(
    dataset: &Dataset,
    config: &ExperimentConfig,
) -> Result<ExperimentOutcome> {
    config.validate(dataset.len())?;
    let plan = &config.plan;
    let grid: Vec<(usize, usize, crate::data::Fold)> = kfold_plan(dataset.len(), plan)?
        .into_iter()
        .enumerate()
        .flat_map(|(r, folds)| {
            folds
                .into_iter()
                .enumerate()
                .map(move |(f, fold)| (r, f, fold))
        })
        .collect();

    let run = || -> Vec<std::result::Result<FoldOutcome, ExperimentError>> {
        grid.par_iter()
            .map(|(r, f, fold)| {
                run_fold(dataset, config, *r, *f, fold).map_err(|source| ExperimentError::Fold {
                    repeat: *r,
                    fold: *f,
                    source,
                })
            })
            .collect()
    };
    let results = match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| ExperimentError::Config(e.to_string()))?
            .install(run),
        None => run(),
    };
    let folds = results.into_iter().collect::<Result<Vec<_>>>()?;
    let report = aggregate(dataset, config, &folds)?;
    Ok(ExperimentOutcome { report, folds })
}

fn run_fold(
    dataset: &Dataset,
    config: &ExperimentConfig,
    repeat: usize,
    fold_idx: usize,
    fold: &crate::data::Fold,
) -> std::result::Result<FoldOutcome, StageError> {
    let plan = &config.plan;
    let fold_id = (repeat * plan.k + fold_idx) as u64;

    let train_raw = dataset.subset(&fold.train);
    let test_raw = dataset.subset(&fold.test);
    let scaling = fit_scaling(&train_raw);
    let train = apply_scaling(&scaling, &train_raw);
    let test = apply_scaling(&scaling, &test_raw);

    let split_seed = seeds::derive(plan.seed, Stream::CalibrationSplit, fold_id);
    let (proper, calibration) = split_icp(&train, plan.q, split_seed)?;

    let mlp = MlpConfig {
        seed: seeds::derive(plan.seed, Stream::Training, fold_id << 16),
        ..config.mlp.clone()
    };
    let model = train_mlp(&proper, &mlp)?;
    let residual = if config.measures.iter().any(Measure::is_normalized) {
        Some(fit_residual_model(&proper, &model, config.min_residual)?)
    } else {
        None
    };

    let calib_pred = model.predict_all(&calibration)?;
    let test_pred = model.predict_all(&test)?;

    let intervals = config
        .measures
        .iter()
        .map(|measure| {
            let icp = FittedIcp::calibrate(*measure, residual.as_ref(), &calibration, &calib_pred)?;
            config
                .deltas
                .iter()
                .map(|&delta| {
                    test.rows()
                        .zip(&test_pred)
                        .map(|(x, &y_hat)| icp.interval(x, y_hat, delta))
                        .collect::<std::result::Result<Vec<_>, StageError>>()
                })
                .collect::<std::result::Result<Vec<_>, StageError>>()
        })
        .collect::<std::result::Result<Vec<_>, StageError>>()?;

    Ok(FoldOutcome {
        repeat,
        fold: fold_idx,
        test_indices: fold.test.clone(),
        labels: test.labels().to_vec(),
        predictions: test_pred,
        intervals,
    })
}

/// Nonconformity scoring for one measure.
#[derive(Clone, Copy)]
struct Scorer<'a> {
    measure: Measure,
    residual: Option<&'a ResidualModel>,
}

impl Scorer<'_> {
    fn normalization(
        &self,
        x: &[f64],
    ) -> std::result::Result<Option<NormalizationParams>, StageError> {
        match self.measure {
            Measure::Absolute => Ok(None),
            Measure::Normalized { beta } => {
                let residual = self
                    .residual
                    .expect("residual model fitted for normalized measure");
                let mu = residual.predict_mu(x)?;
                Ok(Some(NormalizationParams::new(beta, mu)?))
            }
        }
    }

    fn score(
        &self,
        x: &[f64],
        y: f64,
        y_hat: f64,
    ) -> std::result::Result<conformal::NonconformityScore, StageError> {
        Ok(match self.normalization(x)? {
            None => conformal::score_absolute(y, y_hat)?,
            Some(norm) => conformal::score_normalized(y, y_hat, &norm)?,
        })
    }
}

/// A calibrated ICP for one nonconformity measure.
struct FittedIcp<'a> {
    scorer: Scorer<'a>,
    calibration: CalibrationScores,
}

impl<'a> FittedIcp<'a> {
    fn calibrate(
        measure: Measure,
        residual: Option<&'a ResidualModel>,
        calibration: &Dataset,
        predictions: &[f64],
    ) -> std::result::Result<Self, StageError> {
        let scorer = Scorer { measure, residual };
        let scores = calibration
            .rows()
            .zip(calibration.labels())
            .zip(predictions)
            .map(|((x, &y), &y_hat)| scorer.score(x, y, y_hat))
            .collect::<std::result::Result<Vec<_>, StageError>>()?;
        Ok(Self {
            scorer,
            calibration: CalibrationScores::new(scores)?,
        })
    }

    fn interval(
        &self,
        x: &[f64],
        y_hat: f64,
        delta: f64,
    ) -> std::result::Result<PredictionInterval, StageError> {
        Ok(match self.scorer.normalization(x)? {
            None => conformal::interval_absolute(y_hat, &self.calibration, delta)?,
            Some(norm) => conformal::interval_normalized(y_hat, &norm, &self.calibration, delta)?,
        })
    }
}

fn aggregate(
    dataset: &Dataset,
    config: &ExperimentConfig,
    folds: &[FoldOutcome],
) -> Result<EvaluationReport> {
    let labels: Vec<f64> = folds
        .iter()
        .flat_map(|f| f.labels.iter().copied())
        .collect();
    let predictions: Vec<f64> = folds
        .iter()
        .flat_map(|f| f.predictions.iter().copied())
        .collect();

    let measures = config
        .measures
        .iter()
        .enumerate()
        .map(|(mi, &measure)| {
            let levels = config
                .deltas
                .iter()
                .enumerate()
                .map(|(di, &delta)| {
                    let intervals: Vec<PredictionInterval> = folds
                        .iter()
                        .flat_map(|f| f.intervals[mi][di].iter().copied())
                        .collect();
                    let widths: Vec<f64> =
                        intervals.iter().map(PredictionInterval::width).collect();
                    let stats = width_stats(&widths)?;
                    Ok(LevelReport {
                        delta,
                        confidence: 1.0 - delta,
                        median_width: stats.median,
                        interdecile_mean_width: stats.interdecile_mean,
                        error_percentage: miscoverage(&intervals, &labels)?,
                        widths: stats,
                    })
                })
                .collect::<std::result::Result<Vec<_>, EvalError>>()?;
            Ok(MeasureReport { measure, levels })
        })
        .collect::<std::result::Result<Vec<_>, EvalError>>()?;

    Ok(EvaluationReport {
        metadata: ReportMetadata {
            dataset: config.dataset_name.clone(),
            n_examples: dataset.len(),
            n_attributes: dataset.n_attributes(),
            k: config.plan.k,
            repeats: config.plan.repeats,
            q: config.plan.q,
            hidden_units: config.mlp.hidden_units,
            restarts: config.mlp.restarts,
            seed: config.plan.seed,
            n_predictions: labels.len(),
        },
        rmse: rmse(&predictions, &labels)?,
        correlation: correlation(&predictions, &labels).ok(),
        measures,
    })
}
