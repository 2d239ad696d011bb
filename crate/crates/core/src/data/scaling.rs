use super::Dataset;

/// Per-attribute `(min, max)` ranges measured on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    ranges: Vec<(f64, f64)>,
}

impl ScalingParams {
    pub fn from_ranges(ranges: Vec<(f64, f64)>) -> Option<Self> {
        ranges
            .iter()
            .all(|&(lo, hi)| lo.is_finite() && hi.is_finite() && hi >= lo)
            .then_some(Self { ranges })
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn n_attributes(&self) -> usize {
        self.ranges.len()
    }

    /// Maps `min -> -1`, `max -> +1`; constant columns map to 0. Values
    /// outside the fitted range are extended affinely, not clipped.
    pub fn scale_value(&self, column: usize, x: f64) -> f64 {
        let (lo, hi) = self.ranges[column];
        if hi > lo {
            2.0 * (x - lo) / (hi - lo) - 1.0
        } else {
            0.0
        }
    }

    pub fn scale_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &x)| self.scale_value(j, x))
            .collect()
    }
}

/// Panics if `train` is empty.
pub fn fit_scaling(train: &Dataset) -> ScalingParams {
    assert!(!train.is_empty(), "cannot fit scaling on an empty dataset");
    let ranges = (0..train.n_attributes())
        .map(|j| {
            train
                .column(j)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                    (lo.min(x), hi.max(x))
                })
        })
        .collect();
    ScalingParams { ranges }
}

/// Scales attributes; labels are left untouched.
pub fn apply_scaling(params: &ScalingParams, ds: &Dataset) -> Dataset {
    assert_eq!(params.n_attributes(), ds.n_attributes());
    let attributes = ds.rows().flat_map(|r| params.scale_row(r)).collect();
    ds.with_attributes(attributes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        Dataset::from_rows(&rows, vec![0.0; values.len()]).unwrap()
    }

    #[test]
    fn affine_map_to_unit_box() {
        let ds = column(&[0.0, 5.0, 10.0]);
        let scaled = apply_scaling(&fit_scaling(&ds), &ds);
        assert_eq!(scaled.attributes(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let ds = column(&[7.0, 7.0, 7.0]);
        let scaled = apply_scaling(&fit_scaling(&ds), &ds);
        assert_eq!(scaled.attributes(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn no_clipping_outside_training_range() {
        let p = fit_scaling(&column(&[0.0, 10.0]));
        assert!((p.scale_value(0, 12.0) - 1.4).abs() < 1e-15);
    }

    #[test]
    fn labels_untouched() {
        let ds = Dataset::from_rows(&[vec![1.0], vec![3.0]], vec![100.0, -4.0]).unwrap();
        let scaled = apply_scaling(&fit_scaling(&ds), &ds);
        assert_eq!(scaled.labels(), ds.labels());
    }
}
