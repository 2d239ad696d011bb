use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::WidthStats;
use crate::conformal::Measure;

/// First line of every machine-readable report.
pub const REPORT_SCHEMA: &str = "schema = nnicp-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub dataset: String,
    pub n_examples: usize,
    pub n_attributes: usize,
    pub k: usize,
    pub repeats: usize,
    pub q: usize,
    pub hidden_units: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Test predictions pooled over every repeat and fold.
    pub n_predictions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub delta: f64,
    pub confidence: f64,
    pub median_width: f64,
    pub interdecile_mean_width: f64,
    /// Percentage of test labels outside their interval.
    pub error_percentage: f64,
    pub widths: WidthStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub measure: Measure,
    pub levels: Vec<LevelReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metadata: ReportMetadata,
    pub rmse: f64,
    /// `None` when the pooled predictions are constant.
    pub correlation: Option<f64>,
    pub measures: Vec<MeasureReport>,
}

/// `0.05 -> "95"`, `0.025 -> "97.5"`.
pub fn confidence_label(delta: f64) -> String {
    let pct = ((1.0 - delta) * 100.0 * 1e6).round() / 1e6;
    format!("{pct}")
}

impl EvaluationReport {
    pub fn measure(&self, measure: &Measure) -> Option<&MeasureReport> {
        self.measures.iter().find(|m| &m.measure == measure)
    }

    /// Human-readable table: one row per measure with median width,
    /// interdecile mean width and error percentage per confidence level.
    pub fn to_table(&self) -> String {
        let m = &self.metadata;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{}: {} examples, {} attributes; {} folds x {} repeats, q = {}, {} hidden units",
            m.dataset, m.n_examples, m.n_attributes, m.k, m.repeats, m.q, m.hidden_units
        );
        let cc = self
            .correlation
            .map_or_else(|| "undefined".to_string(), |c| format!("{c:.3}"));
        let _ = writeln!(
            out,
            "RMSE {:.4}  CC {cc}  ({} test predictions)",
            self.rmse, m.n_predictions
        );
        let Some(first) = self.measures.first() else {
            return out;
        };
        let labels: Vec<String> = first
            .levels
            .iter()
            .map(|l| format!("{}%", confidence_label(l.delta)))
            .collect();
        let n = labels.len();
        let group = |title: &str| format!("{title:^w$}", w = 9 * n);
        let _ = writeln!(
            out,
            "{:<24}|{}|{}|{}",
            "",
            group("Median Width"),
            group("Interdecile Mean Width"),
            group("Errors (%)")
        );
        let heads: String = labels.iter().map(|l| format!("{l:>9}")).collect();
        let _ = writeln!(out, "{:<24}|{heads}|{heads}|{heads}", "Measure");
        let _ = writeln!(out, "{}", "-".repeat(24 + 3 + 27 * n));
        for mr in &self.measures {
            let cells = |f: &dyn Fn(&LevelReport) -> f64, prec: usize| -> String {
                mr.levels
                    .iter()
                    .map(|l| format!("{:>9.prec$}", f(l), prec = prec))
                    .collect()
            };
            let prec = width_precision(mr);
            let _ = writeln!(
                out,
                "{:<24}|{}|{}|{}",
                mr.measure.to_string(),
                cells(&|l| l.median_width, prec),
                cells(&|l| l.interdecile_mean_width, prec),
                cells(&|l| l.error_percentage, 2)
            );
        }
        out
    }

    /// Flat `key = value` document, first line [`REPORT_SCHEMA`]. Floats use
    /// shortest round-trip formatting, so identical runs give identical bytes.
    pub fn to_kv(&self) -> String {
        let m = &self.metadata;
        let mut out = String::new();
        out.push_str(REPORT_SCHEMA);
        out.push('\n');
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("dataset", &m.dataset);
        kv("n_examples", &m.n_examples);
        kv("n_attributes", &m.n_attributes);
        kv("k", &m.k);
        kv("repeats", &m.repeats);
        kv("q", &m.q);
        kv("hidden_units", &m.hidden_units);
        kv("restarts", &m.restarts);
        kv("seed", &m.seed);
        kv("n_predictions", &m.n_predictions);
        kv("rmse", &self.rmse);
        match self.correlation {
            Some(c) => kv("correlation", &c),
            None => kv("correlation", &"undefined"),
        }
        for mr in &self.measures {
            let key = mr.measure.key();
            match mr.measure {
                Measure::Absolute => kv(&format!("{key}.measure"), &"absolute"),
                Measure::Normalized { beta } => {
                    kv(&format!("{key}.measure"), &"normalized");
                    kv(&format!("{key}.beta"), &beta);
                }
            }
            for l in &mr.levels {
                let p = format!("{key}.c{}", confidence_label(l.delta));
                let w = &l.widths;
                kv(&format!("{p}.delta"), &l.delta);
                kv(&format!("{p}.median_width"), &l.median_width);
                kv(
                    &format!("{p}.interdecile_mean_width"),
                    &l.interdecile_mean_width,
                );
                kv(&format!("{p}.error_percentage"), &l.error_percentage);
                kv(&format!("{p}.decile_10"), &w.decile_10);
                kv(&format!("{p}.quartile_25"), &w.quartile_25);
                kv(&format!("{p}.quartile_75"), &w.quartile_75);
                kv(&format!("{p}.decile_90"), &w.decile_90);
            }
        }
        out
    }

    /// Width boxplot statistics, one CSV row per (measure, confidence).
    pub fn boxplot_csv(&self) -> String {
        let mut out = String::from(
            "measure,beta,confidence,decile_10,quartile_25,median,quartile_75,decile_90,interdecile_mean\n",
        );
        for mr in &self.measures {
            let (name, beta) = match mr.measure {
                Measure::Absolute => ("absolute", String::new()),
                Measure::Normalized { beta } => ("normalized", beta.to_string()),
            };
            for l in &mr.levels {
                let w = &l.widths;
                let _ = writeln!(
                    out,
                    "{name},{beta},{},{},{},{},{},{},{}",
                    confidence_label(l.delta),
                    w.decile_10,
                    w.quartile_25,
                    w.median,
                    w.quartile_75,
                    w.decile_90,
                    w.interdecile_mean
                );
            }
        }
        out
    }
}

/// Enough decimals to show three significant digits of the median width.
fn width_precision(mr: &MeasureReport) -> usize {
    let typical = mr
        .levels
        .iter()
        .map(|l| l.median_width.abs())
        .fold(f64::INFINITY, f64::min);
    if !(typical.is_finite() && typical > 0.0) {
        return 2;
    }
    (2 - typical.log10().floor() as i64).clamp(2, 8) as usize
}
