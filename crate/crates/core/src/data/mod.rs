//! Datasets, CSV ingestion, attribute scaling, ICP/cross-validation splits and
//! cyclic feature encoding.

mod csv_io;
mod scaling;
mod split;
mod tec;

pub use csv_io::{load_csv, read_csv, CsvOptions, LabelColumn};
pub use scaling::{apply_scaling, fit_scaling, ScalingParams};
pub use split::{
    is_calibration_size_form, kfold_plan, read_fold_indices, split_icp, split_icp_indices,
    write_fold_indices, Fold, SplitPlan,
};
pub use tec::tec_features;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Attribute matrix (row-major) plus label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    attributes: Vec<f64>,
    labels: Vec<f64>,
    n_attributes: usize,
    column_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from row-major attributes. Every entry must be finite.
    pub fn new(attributes: Vec<f64>, labels: Vec<f64>, n_attributes: usize) -> Result<Self> {
        if attributes.len() != labels.len() * n_attributes {
            return Err(DataError::Invalid(format!(
                "{} attribute values do not form {} rows of {} columns",
                attributes.len(),
                labels.len(),
                n_attributes
            )));
        }
        if let Some(i) = attributes.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Invalid(format!(
                "non-finite attribute at row {}, column {}",
                i / n_attributes.max(1),
                i % n_attributes.max(1)
            )));
        }
        if let Some(i) = labels.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Invalid(format!("non-finite label at row {i}")));
        }
        Ok(Self {
            attributes,
            labels,
            n_attributes,
            column_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(DataError::Invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(DataError::Invalid(format!(
                "row {i} has {} attributes, expected {d}",
                rows[i].len()
            )));
        }
        Self::new(rows.concat(), labels, d)
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Self {
        self.column_names = Some(names);
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.attributes[i * self.n_attributes..(i + 1) * self.n_attributes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn attributes(&self) -> &[f64] {
        &self.attributes
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut attributes = Vec::with_capacity(indices.len() * self.n_attributes);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            attributes.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            attributes,
            labels,
            n_attributes: self.n_attributes,
            column_names: self.column_names.clone(),
        }
    }

    pub(crate) fn with_attributes(&self, attributes: Vec<f64>) -> Self {
        debug_assert_eq!(attributes.len(), self.attributes.len());
        Self {
            attributes,
            labels: self.labels.clone(),
            n_attributes: self.n_attributes,
            column_names: self.column_names.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert!(Dataset::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0], 2).is_err());
        assert!(Dataset::new(vec![1.0, f64::NAN], vec![1.0], 2).is_err());
        assert!(Dataset::new(vec![1.0, 2.0], vec![f64::INFINITY], 2).is_err());
        assert!(Dataset::from_rows(&[vec![1.0], vec![1.0, 2.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn subset_keeps_order() {
        let ds =
            Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], vec![10.0, 20.0, 30.0]).unwrap();
        let s = ds.subset(&[2, 0]);
        assert_eq!(s.attributes(), &[3.0, 1.0]);
        assert_eq!(s.labels(), &[30.0, 10.0]);
    }
}
