//! Cross-validation, grid tuning and model selection.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::knn::Knn;
use super::lda::Lda;
use super::linear::{ols, ridge};
use super::metrics::{mae, r2, rmse, Confusion, Metric};
use super::tree::{Tree, TreeParams};
use super::{check_data, kfold_assign, select_targets, Features, LearnError, Task, TrainedModel};
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Lda,
    Cart,
    Knn,
    Ols,
    Ridge,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Lda => "lda",
            Algorithm::Cart => "cart",
            Algorithm::Knn => "knn",
            Algorithm::Ols => "ols",
            Algorithm::Ridge => "ridge",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const CLASSIFIERS: [Algorithm; 3] = [Algorithm::Lda, Algorithm::Cart, Algorithm::Knn];
pub const REGRESSORS: [Algorithm; 4] = [Algorithm::Ols, Algorithm::Ridge, Algorithm::Cart, Algorithm::Knn];

pub fn roster(task: Task) -> &'static [Algorithm] {
    match task {
        Task::Classification => &CLASSIFIERS,
        Task::Regression => &REGRESSORS,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Hyper {
    None,
    K(usize),
    Lambda(f64),
    Tree(TreeParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub algorithm: Algorithm,
    pub hyper: Hyper,
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hyper {
            Hyper::None => write!(f, "{}", self.algorithm),
            Hyper::K(k) => write!(f, "{}(k={k})", self.algorithm),
            Hyper::Lambda(l) => write!(f, "{}(lambda={l})", self.algorithm),
            Hyper::Tree(t) => write!(f, "{}(min_leaf={} max_depth={})", self.algorithm, t.min_leaf, t.max_depth),
        }
    }
}

/// Hyperparameter grids searched during cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grids {
    pub knn: Vec<usize>,
    pub ridge: Vec<f64>,
    pub tree: TreeParams,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            knn: vec![5, 9, 15, 25],
            ridge: vec![0.0, 0.01, 0.1, 1.0, 10.0],
            tree: TreeParams::default(),
        }
    }
}

impl Grids {
    pub fn candidates(&self, algorithm: Algorithm) -> Vec<Candidate> {
        let c = |hyper| Candidate { algorithm, hyper };
        match algorithm {
            Algorithm::Lda | Algorithm::Ols => vec![c(Hyper::None)],
            Algorithm::Cart => vec![c(Hyper::Tree(self.tree))],
            Algorithm::Knn => self.knn.iter().map(|&k| c(Hyper::K(k))).collect(),
            Algorithm::Ridge => self.ridge.iter().map(|&l| c(Hyper::Lambda(l))).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CvPlan {
    pub folds: usize,
    pub repeats: usize,
    pub stratified: bool,
    pub seed: u64,
}

impl CvPlan {
    pub fn classification(seed: u64) -> CvPlan {
        CvPlan {
            folds: 10,
            repeats: 1,
            stratified: true,
            seed,
        }
    }

    pub fn regression(seed: u64) -> CvPlan {
        CvPlan {
            folds: 10,
            repeats: 3,
            stratified: false,
            seed,
        }
    }
}

pub fn metrics_for(task: Task) -> &'static [Metric] {
    match task {
        Task::Classification => &[Metric::Accuracy, Metric::Kappa],
        Task::Regression => &[Metric::Mae, Metric::Rmse, Metric::R2],
    }
}

/// Scores predictions; classifier outputs are thresholded at 0.5 and
/// undefined metrics come back as NaN.
pub fn score(task: Task, predicted: &[f64], observed: &[f64]) -> Vec<(Metric, f64)> {
    match task {
        Task::Classification => {
            let p: Vec<bool> = predicted.iter().map(|&v| v > 0.5).collect();
            let o: Vec<bool> = observed.iter().map(|&v| v == 1.0).collect();
            let c = Confusion::from_labels(&p, &o);
            vec![(Metric::Accuracy, c.accuracy()), (Metric::Kappa, c.kappa().unwrap_or(f64::NAN))]
        }
        Task::Regression => vec![
            (Metric::Mae, mae(predicted, observed)),
            (Metric::Rmse, rmse(predicted, observed)),
            (Metric::R2, r2(predicted, observed).unwrap_or(f64::NAN)),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSamples {
    pub metric: Metric,
    pub samples: Vec<f64>,
    pub summary: Summary,
}

/// Resampled scores of one candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvEntry {
    pub candidate: Candidate,
    pub metrics: Vec<MetricSamples>,
}

impl CvEntry {
    pub fn mean(&self, metric: Metric) -> f64 {
        self.metrics
            .iter()
            .find(|m| m.metric == metric)
            .map_or(f64::NAN, |m| m.summary.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub task: Task,
    pub plan: CvPlan,
    /// Best-tuned candidate of each algorithm, in roster order.
    pub entries: Vec<CvEntry>,
    /// Every candidate evaluated.
    pub tuning: Vec<CvEntry>,
}

impl CvReport {
    /// `algorithm,metric,min,q1,median,mean,q3,max,na` rows for `entries`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["algorithm", "metric", "min", "q1", "median", "mean", "q3", "max", "na"])?;
        for e in &self.entries {
            for m in &e.metrics {
                let s = m.summary;
                let mut row = vec![e.candidate.to_string(), m.metric.as_str().to_string()];
                row.extend([s.min, s.q1, s.median, s.mean, s.q3, s.max].iter().map(|v| v.to_string()));
                row.push(s.missing.to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

type FoldScores = (Candidate, Vec<(Metric, f64)>);

/// Ordering where `Less` means `a` is the better candidate.
fn rank(task: Task, a: &CvEntry, b: &CvEntry) -> Ordering {
    // NaN means sort last in either direction.
    let desc = |x: f64, y: f64| match (x.is_nan(), y.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => y.total_cmp(&x),
    };
    let asc = |x: f64, y: f64| match (x.is_nan(), y.is_nan()) {
        (false, false) => x.total_cmp(&y),
        _ => desc(x, y),
    };
    match task {
        Task::Classification => desc(a.mean(Metric::Accuracy), b.mean(Metric::Accuracy))
            .then(desc(a.mean(Metric::Kappa), b.mean(Metric::Kappa))),
        Task::Regression => asc(a.mean(Metric::Rmse), b.mean(Metric::Rmse)).then(asc(a.mean(Metric::Mae), b.mean(Metric::Mae))),
    }
}

/// Best entry of the report; ties go to the earlier roster position.
pub fn select_model(report: &CvReport) -> Option<&CvEntry> {
    let mut best: Option<&CvEntry> = None;
    for e in &report.entries {
        if best.is_none_or(|b| rank(report.task, e, b) == Ordering::Less) {
            best = Some(e);
        }
    }
    best
}

pub fn fit(candidate: &Candidate, x: &Features, y: &[f64]) -> Result<TrainedModel, LearnError> {
    Ok(match (candidate.algorithm, candidate.hyper) {
        (Algorithm::Lda, _) => TrainedModel::Lda(Lda::fit(x, y)?),
        (Algorithm::Cart, Hyper::Tree(t)) => TrainedModel::Tree(Tree::fit(x, y, t)?),
        (Algorithm::Cart, _) => TrainedModel::Tree(Tree::fit(x, y, TreeParams::default())?),
        (Algorithm::Knn, Hyper::K(k)) => TrainedModel::Knn(Knn::fit(x, y, k)?),
        (Algorithm::Knn, _) => TrainedModel::Knn(Knn::fit(x, y, 5)?),
        (Algorithm::Ols, _) => TrainedModel::Linear(ols(x, y)?),
        (Algorithm::Ridge, Hyper::Lambda(l)) => TrainedModel::Linear(ridge(x, y, l)?),
        (Algorithm::Ridge, _) => TrainedModel::Linear(ridge(x, y, 0.0)?),
    })
}

/// Validation-fold predictions for every grid point of `algorithm`.
fn fit_predict_grid(
    algorithm: Algorithm,
    grids: &Grids,
    x_train: &Features,
    y_train: &[f64],
    x_test: &Features,
) -> Vec<(Candidate, Result<Vec<f64>, LearnError>)> {
    let candidates = grids.candidates(algorithm);
    if algorithm == Algorithm::Knn {
        let n = y_train.len();
        let feasible: Vec<usize> = grids.knn.iter().copied().filter(|&k| k >= 1 && k <= n).collect();
        let shared = feasible
            .iter()
            .max()
            .map(|&kmax| Knn::fit(x_train, y_train, kmax))
            .transpose();
        let preds: Option<Vec<Vec<f64>>> = match &shared {
            Ok(Some(m)) => Some(x_test.rows().map(|r| m.predict_grid(r, &feasible)).collect()),
            _ => None,
        };
        return candidates
            .into_iter()
            .map(|c| {
                let Hyper::K(k) = c.hyper else { unreachable!() };
                let res = match (&shared, feasible.iter().position(|&f| f == k), &preds) {
                    (Err(e), _, _) => Err(e.clone()),
                    (_, Some(g), Some(p)) => Ok(p.iter().map(|row| row[g]).collect()),
                    _ => Err(LearnError::KTooLarge { k, n }),
                };
                (c, res)
            })
            .collect();
    }
    candidates
        .into_iter()
        .map(|c| {
            let res = fit(&c, x_train, y_train).map(|m| m.predict_all(x_test));
            (c, res)
        })
        .collect()
}

/// Repeated k-fold cross-validation of every roster algorithm over its
/// grid. Fold failures (for example a training fold with a single class)
/// are recorded as missing samples.
pub fn cross_validate(
    task: Task,
    x: &Features,
    y: &[f64],
    algorithms: &[Algorithm],
    plan: &CvPlan,
    grids: &Grids,
) -> Result<CvReport, LearnError> {
    check_data(task, x, y)?;
    let n = y.len();
    let labels = (plan.stratified && task == Task::Classification).then_some(y);
    let mut splits = Vec::new();
    for r in 0..plan.repeats.max(1) {
        let assign = kfold_assign(n, plan.folds, labels, plan.seed, r as u64)?;
        for f in 0..plan.folds {
            splits.push((assign.clone(), f));
        }
    }
    let per_fold: Vec<Vec<FoldScores>> = splits
        .par_iter()
        .map(|(assign, f)| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assign[i] == *f);
            let (xtr, ytr) = (x.select(&train), select_targets(y, &train));
            let (xte, yte) = (x.select(&test), select_targets(y, &test));
            algorithms
                .iter()
                .flat_map(|&a| fit_predict_grid(a, grids, &xtr, &ytr, &xte))
                .map(|(c, res)| {
                    let scores = match res {
                        Ok(p) => score(task, &p, &yte),
                        Err(_) => metrics_for(task).iter().map(|&m| (m, f64::NAN)).collect(),
                    };
                    (c, scores)
                })
                .collect()
        })
        .collect();

    let mut tuning: Vec<CvEntry> = Vec::new();
    for (slot, (cand, _)) in per_fold[0].iter().enumerate() {
        let metrics = metrics_for(task)
            .iter()
            .enumerate()
            .map(|(mi, &metric)| {
                let samples: Vec<f64> = per_fold.iter().map(|fold| fold[slot].1[mi].1).collect();
                MetricSamples {
                    metric,
                    summary: Summary::of(&samples),
                    samples,
                }
            })
            .collect();
        tuning.push(CvEntry {
            candidate: *cand,
            metrics,
        });
    }
    let entries = algorithms
        .iter()
        .filter_map(|&a| {
            tuning
                .iter()
                .filter(|e| e.candidate.algorithm == a)
                .reduce(|best, e| if rank(task, e, best) == Ordering::Less { e } else { best })
                .cloned()
        })
        .collect();
    Ok(CvReport {
        task,
        plan: *plan,
        entries,
        tuning,
    })
}

/// Cross-validated selection followed by a refit on all of `x`, `y`.
#[derive(Debug, Clone)]
pub struct Selected {
    pub report: CvReport,
    pub candidate: Candidate,
    pub model: TrainedModel,
}

/// Runs [`cross_validate`], then refits candidates in rank order until one
/// trains on the full data.
pub fn train_and_select(
    task: Task,
    x: &Features,
    y: &[f64],
    algorithms: &[Algorithm],
    plan: &CvPlan,
    grids: &Grids,
) -> Result<Selected, LearnError> {
    let report = cross_validate(task, x, y, algorithms, plan, grids)?;
    let mut order: Vec<&CvEntry> = report.entries.iter().collect();
    order.sort_by(|a, b| rank(task, a, b));
    for e in order {
        if let Ok(model) = fit(&e.candidate, x, y) {
            let candidate = e.candidate;
            return Ok(Selected {
                report,
                candidate,
                model,
            });
        }
    }
    Err(LearnError::NothingEvaluated)
}
