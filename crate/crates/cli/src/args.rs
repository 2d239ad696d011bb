use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nnicp::conformal::Measure;
use nnicp::data::LabelColumn;

use crate::{CliError, FitConfig, PredictConfig, PredictInput, RunConfig, TrainingOptions};

#[derive(Debug, Parser)]
#[command(
    name = "nnicp",
    version,
    about = "Neural-network inductive conformal prediction for regression"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cross-validated evaluation of interval tightness and reliability.
    Run(RunArgs),
    /// Fit one ICP on a whole dataset and save it.
    Fit(FitArgs),
    /// Predict intervals with a fitted ICP.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Absolute,
    Normalized,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SingleMeasureArg {
    Absolute,
    Normalized,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with numeric attributes and a label column.
    #[arg(long)]
    pub data: PathBuf,
    /// `last`, a zero-based index or a header name.
    #[arg(long, default_value = "last")]
    pub label_column: String,
    /// The first CSV line is a header.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = TrainingOptions::default().hidden_units)]
    pub hidden: usize,
    #[arg(long, default_value_t = TrainingOptions::default().max_epochs)]
    pub max_epochs: usize,
    /// Epochs without validation improvement before early stopping.
    #[arg(long, default_value_t = TrainingOptions::default().patience)]
    pub patience: usize,
    /// Random initializations per network; the best on validation is kept.
    #[arg(long, default_value_t = TrainingOptions::default().restarts)]
    pub restarts: usize,
}

impl TrainingArgs {
    fn options(&self) -> TrainingOptions {
        TrainingOptions {
            hidden_units: self.hidden,
            max_epochs: self.max_epochs,
            patience: self.patience,
            restarts: self.restarts,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Calibration set size, of the form 100n - 1.
    #[arg(long, default_value_t = 99)]
    pub q: usize,
    #[arg(long, value_enum, default_value_t = MeasureArg::Absolute)]
    pub measure: MeasureArg,
    /// Normalized-measure sensitivities, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub beta: Vec<f64>,
    /// Significance levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.10,0.05,0.01")]
    pub delta: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for report.txt, report.kv, widths.csv and folds.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Maximum folds processed concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 99)]
    pub q: usize,
    #[arg(long, value_enum, default_value_t = SingleMeasureArg::Absolute)]
    pub measure: SingleMeasureArg,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output artifact path.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Artifact written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// One comma-separated feature vector.
    #[arg(
        long,
        conflicts_with = "input",
        required_unless_present = "input",
        allow_hyphen_values = true
    )]
    pub features: Option<String>,
    /// CSV of feature rows.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// The input CSV has a header line.
    #[arg(long, requires = "input")]
    pub header: bool,
    /// The input CSV also holds labels in this column; coverage is reported.
    #[arg(long, requires = "input")]
    pub label_column: Option<String>,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn label_column(s: &str) -> LabelColumn {
    s.parse().unwrap_or(LabelColumn::Last)
}

impl RunArgs {
    pub fn to_config(&self) -> RunConfig {
        let normalized = || self.beta.iter().map(|&beta| Measure::Normalized { beta });
        let measures = match self.measure {
            MeasureArg::Absolute => vec![Measure::Absolute],
            MeasureArg::Normalized => normalized().collect(),
            MeasureArg::Both => std::iter::once(Measure::Absolute)
                .chain(normalized())
                .collect(),
        };
        RunConfig {
            data: self.data.data.clone(),
            label_column: label_column(&self.data.label_column),
            has_header: self.data.header,
            k: self.k,
            repeats: self.repeats,
            q: self.q,
            measures,
            deltas: self.delta.clone(),
            seed: self.seed,
            out: self.out.clone(),
            jobs: self.jobs,
            training: self.training.options(),
        }
    }
}

impl FitArgs {
    pub fn to_config(&self) -> FitConfig {
        FitConfig {
            data: self.data.data.clone(),
            label_column: label_column(&self.data.label_column),
            has_header: self.data.header,
            q: self.q,
            measure: match self.measure {
                SingleMeasureArg::Absolute => Measure::Absolute,
                SingleMeasureArg::Normalized => Measure::Normalized { beta: self.beta },
            },
            seed: self.seed,
            out: self.out.clone(),
            training: self.training.options(),
        }
    }
}

impl PredictArgs {
    pub fn to_config(&self) -> Result<PredictConfig, CliError> {
        let input = match (&self.features, &self.input) {
            (Some(f), _) => PredictInput::Features(
                f.split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| {
                                CliError::Usage(format!("--features: not a finite number: {t:?}"))
                            })
                    })
                    .collect::<Result<_, _>>()?,
            ),
            (None, Some(path)) => match &self.label_column {
                Some(col) => PredictInput::LabeledCsv {
                    path: path.clone(),
                    has_header: self.header,
                    label_column: label_column(col),
                },
                None => PredictInput::Csv {
                    path: path.clone(),
                    has_header: self.header,
                },
            },
            (None, None) => {
                return Err(CliError::Usage(
                    "one of --features or --input is required".into(),
                ))
            }
        };
        Ok(PredictConfig {
            model: self.model.clone(),
            input,
            confidence: self.confidence,
        })
    }
}

/// Executes a parsed command line; returns what should go to standard output.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Run(a) => crate::cmd_run(&a.to_config()).map(|r| r.to_table()),
        Command::Fit(a) => {
            let art = crate::cmd_fit(&a.to_config())?;
            Ok(format!(
                "fitted {} ICP: {} attributes, {} hidden units, q = {}; saved to {}\n",
                art.measure,
                art.n_attributes(),
                art.network.hidden_units(),
                art.calibration.q(),
                a.out.display()
            ))
        }
        Command::Predict(a) => {
            let out = crate::cmd_predict(&a.to_config()?)?;
            if let Some(e) = out.error_percentage() {
                log::warn!(
                    "{} labeled rows, {e:.2}% outside their interval",
                    out.rows.len()
                );
            }
            let csv = out.to_csv();
            match &a.out {
                Some(path) => {
                    std::fs::write(path, csv).map_err(|e| crate::io_error(path, e))?;
                    Ok(String::new())
                }
                None => Ok(csv),
            }
        }
    }
}
