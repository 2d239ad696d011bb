use rand::seq::SliceRandom;

use super::{DataError, Dataset, Result};
use crate::seeds::{self, Stream};

/// Cross-validation protocol: `repeats` random permutations, each split into
/// `k` folds, with `q` calibration examples taken from every training fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    pub k: usize,
    pub repeats: usize,
    pub q: usize,
    pub seed: u64,
}

impl SplitPlan {
    pub fn new(k: usize, repeats: usize, q: usize, seed: u64) -> Self {
        Self {
            k,
            repeats,
            q,
            seed,
        }
    }

    /// Checks the plan against a dataset of `n` examples.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k < 2 {
            return Err(DataError::InvalidSplit(format!(
                "k must be >= 2, got {}",
                self.k
            )));
        }
        if self.repeats == 0 {
            return Err(DataError::InvalidSplit("repeats must be >= 1".to_string()));
        }
        if self.k > n {
            return Err(DataError::InvalidSplit(format!(
                "cannot split {n} examples into {} folds",
                self.k
            )));
        }
        if self.q == 0 {
            return Err(DataError::InvalidSplit("q must be >= 1".to_string()));
        }
        let smallest_train = n - n.div_ceil(self.k);
        if self.q >= smallest_train {
            return Err(DataError::InvalidSplit(format!(
                "q = {} must be smaller than the smallest training fold ({smallest_train})",
                self.q
            )));
        }
        if !is_calibration_size_form(self.q) {
            log::warn!(
                "calibration size q = {} is not of the form 100n - 1",
                self.q
            );
        }
        Ok(())
    }
}

/// `true` when `q = 100n - 1` for some integer `n >= 1`.
pub fn is_calibration_size_form(q: usize) -> bool {
    q >= 99 && (q + 1).is_multiple_of(100)
}

/// One cross-validation fold: sorted train and test indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Folds for every repeat. Fold sizes differ by at most one; the first
/// `n % k` folds hold the extra example.
pub fn kfold_plan(n: usize, plan: &SplitPlan) -> Result<Vec<Vec<Fold>>> {
    if plan.k < 2 || plan.k > n {
        return Err(DataError::InvalidSplit(format!(
            "cannot split {n} examples into {} folds",
            plan.k
        )));
    }
    let base = n / plan.k;
    let extra = n % plan.k;
    Ok((0..plan.repeats)
        .map(|r| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut seeds::rng(seeds::derive(
                plan.seed,
                Stream::Permutation,
                r as u64,
            )));
            let mut start = 0;
            (0..plan.k)
                .map(|f| {
                    let size = base + usize::from(f < extra);
                    let mut test = perm[start..start + size].to_vec();
                    let mut train = [&perm[..start], &perm[start + size..]].concat();
                    start += size;
                    test.sort_unstable();
                    train.sort_unstable();
                    Fold { train, test }
                })
                .collect()
        })
        .collect())
}

/// `(proper_training, calibration)` index lists for a training set of size
/// `l`. Calibration examples are drawn by a seeded shuffle.
pub fn split_icp_indices(l: usize, q: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if q == 0 || q >= l {
        return Err(DataError::InvalidSplit(format!(
            "calibration size q = {q} must satisfy 1 <= q < {l}"
        )));
    }
    if !is_calibration_size_form(q) {
        log::warn!("calibration size q = {q} is not of the form 100n - 1");
    }
    if q == l - 1 {
        log::warn!("calibration size q = {q} leaves a single proper training example");
    }
    let mut perm: Vec<usize> = (0..l).collect();
    perm.shuffle(&mut seeds::rng(seed));
    let mut calibration = perm[..q].to_vec();
    let mut proper = perm[q..].to_vec();
    calibration.sort_unstable();
    proper.sort_unstable();
    Ok((proper, calibration))
}

pub fn split_icp(training: &Dataset, q: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let (proper, calibration) = split_icp_indices(training.len(), q, seed)?;
    Ok((training.subset(&proper), training.subset(&calibration)))
}

/// Serializes folds as text: one line per (repeat, fold) listing the test
/// indices, space separated, repeat-major.
pub fn write_fold_indices(folds: &[Vec<Fold>]) -> String {
    let mut out = String::new();
    for fold in folds.iter().flatten() {
        let line: Vec<String> = fold.test.iter().map(usize::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Inverse of [`write_fold_indices`]; training indices are the complement of
/// each test list within `0..n`.
pub fn read_fold_indices(text: &str, n: usize, k: usize) -> Result<Vec<Vec<Fold>>> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if k == 0 || !lines.len().is_multiple_of(k) {
        return Err(DataError::InvalidSplit(format!(
            "{} index lines is not a multiple of k = {k}",
            lines.len()
        )));
    }
    let mut folds = Vec::with_capacity(lines.len());
    for (row, line) in lines.iter().enumerate() {
        let mut test = line
            .split_whitespace()
            .enumerate()
            .map(|(col, tok)| {
                tok.parse::<usize>()
                    .ok()
                    .filter(|&i| i < n)
                    .ok_or_else(|| DataError::Parse {
                        row: row + 1,
                        column: col + 1,
                        message: format!("bad index {tok:?} for n = {n}"),
                    })
            })
            .collect::<Result<Vec<usize>>>()?;
        test.sort_unstable();
        let mut in_test = vec![false; n];
        for &i in &test {
            in_test[i] = true;
        }
        let train = (0..n).filter(|&i| !in_test[i]).collect();
        folds.push(Fold { train, test });
    }
    let repeats = folds.len() / k;
    let mut it = folds.into_iter();
    Ok((0..repeats)
        .map(|_| it.by_ref().take(k).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(n: usize, k: usize) -> Vec<usize> {
        let plan = SplitPlan::new(k, 1, 1, 3);
        kfold_plan(n, &plan).unwrap()[0]
            .iter()
            .map(|f| f.test.len())
            .collect()
    }

    #[test]
    fn fold_sizes() {
        assert_eq!(sizes(10, 2), vec![5, 5]);
        assert_eq!(sizes(11, 2), vec![6, 5]);
        let s = sizes(506, 10);
        assert_eq!(s.iter().filter(|&&x| x == 51).count(), 6);
        assert_eq!(s.iter().filter(|&&x| x == 50).count(), 4);
    }

    #[test]
    fn too_many_folds() {
        assert!(kfold_plan(3, &SplitPlan::new(4, 1, 1, 0)).is_err());
    }

    #[test]
    fn repeats_use_distinct_permutations() {
        let folds = kfold_plan(50, &SplitPlan::new(2, 3, 1, 11)).unwrap();
        assert_ne!(folds[0][0].test, folds[1][0].test);
        assert_ne!(folds[1][0].test, folds[2][0].test);
    }

    #[test]
    fn icp_split_sizes() {
        let (proper, calib) = split_icp_indices(506, 99, 1).unwrap();
        assert_eq!((proper.len(), calib.len()), (407, 99));
        let (proper, calib) = split_icp_indices(10, 9, 1).unwrap();
        assert_eq!((proper.len(), calib.len()), (1, 9));
        assert!(split_icp_indices(10, 0, 1).is_err());
        assert!(split_icp_indices(10, 10, 1).is_err());
    }

    #[test]
    fn calibration_size_form() {
        assert!(is_calibration_size_form(99));
        assert!(is_calibration_size_form(299));
        assert!(!is_calibration_size_form(300));
        assert!(!is_calibration_size_form(0));
    }

    #[test]
    fn plan_validation() {
        assert!(SplitPlan::new(4, 10, 299, 0).validate(4177).is_ok());
        assert!(SplitPlan::new(1, 10, 99, 0).validate(100).is_err());
        assert!(SplitPlan::new(2, 10, 50, 0).validate(100).is_err());
        assert!(SplitPlan::new(2, 0, 9, 0).validate(100).is_err());
    }

    #[test]
    fn fold_index_file_round_trip() {
        let folds = kfold_plan(23, &SplitPlan::new(3, 2, 1, 5)).unwrap();
        let text = write_fold_indices(&folds);
        assert_eq!(text.lines().count(), 6);
        assert_eq!(read_fold_indices(&text, 23, 3).unwrap(), folds);
        assert!(read_fold_indices("1 2\n99\n", 23, 2).is_err());
    }
}
