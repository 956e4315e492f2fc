//! Small supervised-learning stack for milestone clouds.
//!
//! Classifiers output `P(class 1)`, regressors output a real value; both go
//! through the same [`TrainedModel::predict`] entry point. Cross-validation,
//! grid tuning and model selection live in [`cv`].

pub mod cv;
pub mod knn;
pub mod lda;
pub mod linear;
pub mod metrics;
pub mod tree;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;
use thiserror::Error;

pub use cv::{cross_validate, select_model, train_and_select, Algorithm, Candidate, CvPlan, CvReport, Grids, Hyper, Selected};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("no training samples")]
    Empty,
    #[error("{features} feature rows but {targets} targets")]
    LengthMismatch { features: usize, targets: usize },
    #[error("row {row} has {got} values, expected {expected}")]
    RowWidth { row: usize, got: usize, expected: usize },
    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },
    #[error("class labels must be 0 or 1, found {value} at row {row}")]
    BadLabel { row: usize, value: f64 },
    #[error("need at least one sample of each class")]
    SingleClass,
    #[error("k = {k} exceeds the {n} available samples")]
    KTooLarge { k: usize, n: usize },
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("need more samples ({n}) than coefficients ({p})")]
    TooFewSamples { n: usize, p: usize },
    #[error("rank-deficient design: column `{column}` is collinear with {}", .with.join(", "))]
    RankDeficient { column: String, with: Vec<String> },
    #[error("no algorithm could be evaluated")]
    NothingEvaluated,
}

/// Row-major feature matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    names: Vec<String>,
    data: Vec<f64>,
}

impl Features {
    pub fn new(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, LearnError> {
        let p = names.len();
        let mut data = Vec::with_capacity(rows.len() * p);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(LearnError::RowWidth {
                    row,
                    got: r.len(),
                    expected: p,
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(LearnError::NonFinite { row });
            }
            data.extend_from_slice(r);
        }
        Ok(Features { names, data })
    }

    /// Two-column matrix from `(x, y)` pairs.
    pub fn from_pairs(names: [&str; 2], pairs: &[(f64, f64)]) -> Result<Self, LearnError> {
        if let Some(row) = pairs.iter().position(|p| !(p.0.is_finite() && p.1.is_finite())) {
            return Err(LearnError::NonFinite { row });
        }
        Ok(Features {
            names: names.iter().map(|s| s.to_string()).collect(),
            data: pairs.iter().flat_map(|&(a, b)| [a, b]).collect(),
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn n_rows(&self) -> usize {
        if self.names.is_empty() {
            0
        } else {
            self.data.len() / self.names.len()
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.names.len();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.names.len().max(1))
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub fn select(&self, idx: &[usize]) -> Features {
        let mut data = Vec::with_capacity(idx.len() * self.names.len());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Features {
            names: self.names.clone(),
            data,
        }
    }

    /// Applies `f` to every value of column `j`.
    pub fn map_column(&self, j: usize, f: impl Fn(f64) -> f64) -> Features {
        let p = self.names.len();
        let mut out = self.clone();
        for r in out.data.chunks_exact_mut(p) {
            r[j] = f(r[j]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

/// Checks that `x` and `y` line up, and that labels are 0/1 for classification.
pub fn check_data(task: Task, x: &Features, y: &[f64]) -> Result<(), LearnError> {
    if x.n_rows() != y.len() {
        return Err(LearnError::LengthMismatch {
            features: x.n_rows(),
            targets: y.len(),
        });
    }
    if y.is_empty() {
        return Err(LearnError::Empty);
    }
    for (row, &v) in y.iter().enumerate() {
        if !v.is_finite() {
            return Err(LearnError::NonFinite { row });
        }
        if task == Task::Classification && v != 0.0 && v != 1.0 {
            return Err(LearnError::BadLabel { row, value: v });
        }
    }
    Ok(())
}

pub(crate) fn select_targets(y: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| y[i]).collect()
}

/// Sample indices in shuffled order, grouped by stratum (ascending label)
/// when labels are given.
fn shuffled_groups(n: usize, labels: Option<&[f64]>, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    match labels {
        None => groups.push((0.0, (0..n).collect())),
        Some(labels) => {
            for (i, &l) in labels.iter().enumerate() {
                match groups.iter_mut().find(|g| g.0 == l) {
                    Some(g) => g.1.push(i),
                    None => groups.push((l, vec![i])),
                }
            }
            groups.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
    }
    groups
        .into_iter()
        .map(|(_, mut g)| {
            g.shuffle(rng);
            g
        })
        .collect()
}

/// Fold index (`0..k`) for each of `n` samples.
///
/// Samples are shuffled, then dealt round-robin; with labels the dealing runs
/// stratum by stratum with a continuing fold position, so every fold holds
/// its stratum share to within one sample.
pub fn kfold_assign(n: usize, k: usize, labels: Option<&[f64]>, seed: u64, stream: u64) -> Result<Vec<usize>, LearnError> {
    if k < 2 {
        return Err(LearnError::TooFewFolds(k));
    }
    if k > n {
        return Err(LearnError::KTooLarge { k, n });
    }
    if let Some(l) = labels {
        if l.len() != n {
            return Err(LearnError::LengthMismatch {
                features: n,
                targets: l.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut fold = vec![0; n];
    let mut pos = 0;
    for group in shuffled_groups(n, labels, &mut rng) {
        for i in group {
            fold[i] = pos % k;
            pos += 1;
        }
    }
    Ok(fold)
}

/// Train/test index split with `train_ratio` of each stratum in training.
pub fn train_test_split(n: usize, train_ratio: f64, labels: Option<&[f64]>, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for group in shuffled_groups(n, labels, &mut rng) {
        let cut = ((group.len() as f64) * train_ratio.clamp(0.0, 1.0)).round() as usize;
        train.extend_from_slice(&group[..cut]);
        test.extend_from_slice(&group[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// A fitted model; classifiers predict `P(class 1)`.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Lda(lda::Lda),
    Tree(tree::Tree),
    Knn(knn::Knn),
    Linear(linear::LinearModel),
}

impl TrainedModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            TrainedModel::Lda(m) => m.posterior(x),
            TrainedModel::Tree(m) => m.predict(x),
            TrainedModel::Knn(m) => m.predict(x),
            TrainedModel::Linear(m) => m.predict(x),
        }
    }

    pub fn predict_all(&self, x: &Features) -> Vec<f64> {
        x.rows().map(|r| self.predict(r)).collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn pairs_features(pairs: &[(f64, f64)]) -> Features {
        Features::from_pairs(["ad_j", "tad_j"], pairs).unwrap()
    }

    #[test]
    fn loo_partition() {
        let f = kfold_assign(10, 10, None, 3, 0).unwrap();
        let mut s = f.clone();
        s.sort();
        assert_eq!(s, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn stratified_counts() {
        let labels: Vec<f64> = (0..100).map(|i| if i % 10 < 3 { 1.0 } else { 0.0 }).collect();
        let f = kfold_assign(100, 10, Some(&labels), 9, 0).unwrap();
        for k in 0..10 {
            let pos = (0..100).filter(|&i| f[i] == k && labels[i] == 1.0).count();
            let all = f.iter().filter(|&&x| x == k).count();
            assert_eq!((pos, all), (3, 10));
        }
        assert_eq!(f, kfold_assign(100, 10, Some(&labels), 9, 0).unwrap());
        assert_ne!(f, kfold_assign(100, 10, Some(&labels), 9, 1).unwrap());
    }

    #[test]
    fn kfold_errors() {
        assert_eq!(kfold_assign(3, 4, None, 0, 0), Err(LearnError::KTooLarge { k: 4, n: 3 }));
        assert_eq!(kfold_assign(3, 1, None, 0, 0), Err(LearnError::TooFewFolds(1)));
    }

    #[test]
    fn split_keeps_proportions() {
        let labels: Vec<f64> = (0..1000).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let (train, test) = train_test_split(1000, 0.8, Some(&labels), 1);
        assert_eq!((train.len(), test.len()), (800, 200));
        assert_eq!(train.iter().filter(|&&i| labels[i] == 1.0).count(), 200);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn data_checks() {
        let x = pairs_features(&[(1.0, 2.0), (3.0, 4.0)]);
        assert!(check_data(Task::Classification, &x, &[0.0, 1.0]).is_ok());
        assert!(matches!(check_data(Task::Classification, &x, &[0.0, 2.0]), Err(LearnError::BadLabel { row: 1, .. })));
        assert!(matches!(check_data(Task::Regression, &x, &[0.0]), Err(LearnError::LengthMismatch { .. })));
        assert_eq!(x.select(&[1]).row(0), &[3.0, 4.0]);
        assert!(Features::from_pairs(["a", "b"], &[(f64::NAN, 1.0)]).is_err());
    }
}
