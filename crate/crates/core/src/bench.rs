//! Duration-at-completion forecasts and the MAPE benchmark.
//!
//! Three methods forecast the final duration (EDAC) at each control period:
//! earned schedule (`Esm`), and the stochastic pipeline on work-period curves
//! (`Sedm`) or on cost curves (`Sevm`). The stochastic pipeline locates the
//! project on every simulated run, learns delay probability and delay amount
//! from those matched points, and reports `EDAC = BPD + predicted delay`.
//!
//! The benchmark is retrospective: MAPE is measured against the realized
//! duration, which is only known once the project has finished.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::curves::{esm_forecast, ControlSnapshot, CurveError, TrackingLog, ValueMeasure};
use crate::milestone::{build_point_cloud, milestone_percentile, KdeConfig, MilestoneError, PointCloud};
use crate::montecarlo::{realization, SimulationError, SimulationStore};
use crate::network::{NetworkError, ProjectNetwork};
use crate::statlearn::cv::{roster, score};
use crate::statlearn::metrics::Metric;
use crate::statlearn::{
    select_targets, train_and_select, train_test_split, Candidate, CvPlan, CvReport, Features, Grids, LearnError, Task,
    TrainedModel,
};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Milestone(#[from] MilestoneError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("store holds {store} curves but the snapshot is in {snapshot}")]
    MeasureMismatch { store: ValueMeasure, snapshot: ValueMeasure },
    #[error("{0} needs a {1} simulation store")]
    MissingStore(Method, ValueMeasure),
    #[error("realized duration must be positive, got {0}")]
    NonPositiveRd(f64),
    #[error("no forecasts to score")]
    EmptySeries,
    #[error("tracking ends at period {0} before every activity is finished")]
    Incomplete(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    #[serde(rename = "ESM")]
    Esm,
    #[serde(rename = "SEVM")]
    Sevm,
    #[serde(rename = "SEDM")]
    Sedm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Esm, Method::Sevm, Method::Sedm];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Esm => "ESM",
            Method::Sevm => "SEVM",
            Method::Sedm => "SEDM",
        }
    }

    /// Value measure of the curves the method works on.
    pub fn measure(self) -> ValueMeasure {
        match self {
            Method::Sedm => ValueMeasure::WorkPeriods,
            Method::Esm | Method::Sevm => ValueMeasure::Cost,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "ESM" => Ok(Method::Esm),
            "SEVM" => Ok(Method::Sevm),
            "SEDM" => Ok(Method::Sedm),
            _ => Err(format!("unknown method `{s}` (expected ESM, SEVM or SEDM)")),
        }
    }
}

/// What an EDAC value rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// No time has elapsed: the plan itself.
    Plan,
    /// Learned from the simulated cloud, or the earned-schedule formula.
    Model,
    /// Every simulated run shares one outcome, so no model is fitted.
    Degenerate,
    /// The project has finished; the duration is observed.
    Observed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForecastResult {
    pub method: Method,
    /// Control period AD.
    pub ad: usize,
    /// Probability of finishing after BPD (stochastic methods).
    pub p_delay: Option<f64>,
    /// Predicted `AFD - BPD`.
    pub expected_deviation: f64,
    pub edac: f64,
    pub anomaly_percentile: Option<f64>,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastConfig {
    pub class_plan: CvPlan,
    pub reg_plan: CvPlan,
    pub grids: Grids,
    /// Fraction of the cloud used for training; the rest scores the pick.
    pub train_ratio: f64,
    pub kde: KdeConfig,
    pub anomaly: bool,
    pub seed: u64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            class_plan: CvPlan::classification(0),
            reg_plan: CvPlan::regression(0),
            grids: Grids::default(),
            train_ratio: 0.8,
            kde: KdeConfig::default(),
            anomaly: true,
            seed: 0,
        }
    }
}

impl ForecastConfig {
    fn reseeded(&self, seed: u64) -> ForecastConfig {
        let mut c = self.clone();
        c.seed = seed;
        c.class_plan.seed = seed;
        c.reg_plan.seed = seed;
        c
    }
}

/// A selected model with its cross-validation evidence and held-out scores.
#[derive(Debug, Clone)]
pub struct ModelSummary {
    pub report: CvReport,
    pub chosen: Candidate,
    pub test_scores: Vec<(Metric, f64)>,
    pub model: TrainedModel,
}

#[derive(Debug, Clone)]
pub struct StochasticForecast {
    pub result: ForecastResult,
    pub classifier: Option<ModelSummary>,
    pub regressor: Option<ModelSummary>,
    pub cloud: Option<PointCloud>,
}

fn method_for(measure: ValueMeasure) -> Method {
    match measure {
        ValueMeasure::WorkPeriods => Method::Sedm,
        ValueMeasure::Cost => Method::Sevm,
    }
}

fn fit_task(
    task: Task,
    x: &Features,
    y: &[f64],
    train: &[usize],
    test: &[usize],
    plan: &CvPlan,
    grids: &Grids,
) -> Result<ModelSummary, ForecastError> {
    let (xtr, ytr) = (x.select(train), select_targets(y, train));
    let sel = train_and_select(task, &xtr, &ytr, roster(task), plan, grids)?;
    let test_scores = if test.is_empty() {
        Vec::new()
    } else {
        let pred = sel.model.predict_all(&x.select(test));
        score(task, &pred, &select_targets(y, test))
    };
    Ok(ModelSummary {
        report: sel.report,
        chosen: sel.candidate,
        test_scores,
        model: sel.model,
    })
}

/// Stochastic EDAC at one control period (SEDM for work-period snapshots,
/// SEVM for cost snapshots).
pub fn stochastic_forecast(
    network: &ProjectNetwork,
    snapshot: &ControlSnapshot,
    store: &SimulationStore,
    config: &ForecastConfig,
) -> Result<StochasticForecast, ForecastError> {
    store.check_fingerprint(network)?;
    if store.measure() != snapshot.measure {
        return Err(ForecastError::MeasureMismatch {
            store: store.measure(),
            snapshot: snapshot.measure,
        });
    }
    let method = method_for(snapshot.measure);
    let bpd = store.bpd;
    let bare = |p_delay, deviation: f64, basis| StochasticForecast {
        result: ForecastResult {
            method,
            ad: snapshot.ad,
            p_delay,
            expected_deviation: deviation,
            edac: bpd + deviation,
            anomaly_percentile: None,
            basis,
        },
        classifier: None,
        regressor: None,
        cloud: None,
    };
    if snapshot.complete {
        let ad = snapshot.ad as f64;
        let late = if ad > bpd { 1.0 } else { 0.0 };
        return Ok(bare(Some(late), ad - bpd, Basis::Observed));
    }
    if snapshot.ad == 0 {
        return Ok(bare(Some(store.delay_rate()), 0.0, Basis::Plan));
    }

    let cloud = build_point_cloud(store, snapshot.earned)?;
    let observed = (snapshot.ad as f64, snapshot.actual);
    let anomaly = if config.anomaly {
        let pts: Vec<(f64, f64)> = cloud.points.iter().map(|p| (p.ad, p.tad)).collect();
        Some(milestone_percentile(&pts, observed, &config.kde)?)
    } else {
        None
    };
    let labels: Vec<f64> = store.records.iter().map(|r| r.outcome.delay_flag as u8 as f64).collect();
    let amounts: Vec<f64> = store.records.iter().map(|r| r.outcome.delay_amount).collect();
    let x = Features::from_pairs(["ad_j", "tad_j"], &cloud.points.iter().map(|p| (p.ad, p.tad)).collect::<Vec<_>>())?;
    let (train, test) = train_test_split(labels.len(), config.train_ratio, Some(&labels), config.seed);
    let train = if train.is_empty() { (0..labels.len()).collect() } else { train };

    let single_class = labels.iter().all(|&l| l == labels[0]);
    let constant_amount = amounts.iter().all(|&a| a == amounts[0]);
    let classifier = if single_class {
        None
    } else {
        Some(fit_task(Task::Classification, &x, &labels, &train, &test, &config.class_plan, &config.grids)?)
    };
    let regressor = if constant_amount {
        None
    } else {
        Some(fit_task(Task::Regression, &x, &amounts, &train, &test, &config.reg_plan, &config.grids)?)
    };
    let query = [observed.0, observed.1];
    let p_delay = match &classifier {
        Some(m) => m.model.predict(&query).clamp(0.0, 1.0),
        None => labels[0],
    };
    let deviation = match &regressor {
        Some(m) => m.model.predict(&query),
        None => amounts[0],
    };
    let basis = if single_class && constant_amount {
        Basis::Degenerate
    } else {
        Basis::Model
    };
    Ok(StochasticForecast {
        result: ForecastResult {
            method,
            ad: snapshot.ad,
            p_delay: Some(p_delay),
            expected_deviation: deviation,
            edac: bpd + deviation,
            anomaly_percentile: anomaly,
            basis,
        },
        classifier,
        regressor,
        cloud: Some(cloud),
    })
}

/// Earned-schedule EDAC at control period `ad`, from cost curves.
pub fn esm_at(network: &ProjectNetwork, log: &TrackingLog, ad: usize) -> Result<ForecastResult, ForecastError> {
    let snap = ControlSnapshot::from_tracking(network, log, ad, ValueMeasure::Cost)?;
    let bpd = network.bpd();
    let (edac, basis) = if snap.complete {
        (ad as f64, Basis::Observed)
    } else if ad == 0 {
        (bpd, Basis::Plan)
    } else {
        (esm_forecast(ad as f64, snap.earned_time, bpd), Basis::Model)
    };
    Ok(ForecastResult {
        method: Method::Esm,
        ad,
        p_delay: None,
        expected_deviation: edac - bpd,
        edac,
        anomaly_percentile: None,
        basis,
    })
}

/// Mean absolute percentage error of a forecast series against `rd`.
pub fn mape(rd: f64, edac: &[f64]) -> Result<f64, ForecastError> {
    if !(rd > 0.0) {
        return Err(ForecastError::NonPositiveRd(rd));
    }
    if edac.is_empty() {
        return Err(ForecastError::EmptySeries);
    }
    Ok(100.0 / edac.len() as f64 * edac.iter().map(|e| (rd - e).abs() / rd).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnomalyMode {
    Off,
    /// Only at the percent-complete checkpoints.
    Checkpoints,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkConfig {
    pub forecast: ForecastConfig,
    /// Percent of BPD elapsed at which report rows are taken.
    pub checkpoints: Vec<u32>,
    pub anomaly: AnomalyMode,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            forecast: ForecastConfig::default(),
            checkpoints: (0..=10).map(|k| k * 10).collect(),
            anomaly: AnomalyMode::Checkpoints,
        }
    }
}

/// Control period of a percent-of-BPD checkpoint; 100% is the completion
/// period, so the last row always shows the finished project.
pub fn checkpoint_period(percent: u32, bpd: f64, completion: usize) -> usize {
    if percent >= 100 {
        completion
    } else {
        ((percent as f64 * bpd / 100.0).round() as usize).min(completion)
    }
}

/// Simulation stores a benchmark draws on; SEDM needs the work-period store,
/// SEVM the cost store.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stores<'a> {
    pub work: Option<&'a SimulationStore>,
    pub cost: Option<&'a SimulationStore>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSeries {
    pub method: Method,
    /// One forecast per control period `1..=completion`.
    pub results: Vec<ForecastResult>,
    pub mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointRow {
    pub percent: u32,
    pub ad: usize,
    pub results: Vec<ForecastResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapeReport {
    pub rd: f64,
    pub bpd: f64,
    pub series: Vec<MethodSeries>,
    pub checkpoints: Vec<CheckpointRow>,
}

impl MapeReport {
    pub fn mape(&self, method: Method) -> Option<f64> {
        self.series.iter().find(|s| s.method == method).map(|s| s.mape)
    }

    /// `method,control_time,edac,p_delay,anomaly_percentile` rows.
    pub fn write_forecasts_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "control_time", "edac", "p_delay", "anomaly_percentile"])?;
        for s in &self.series {
            for r in &s.results {
                w.write_record(forecast_fields(r))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `method,mape` rows.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "mape"])?;
        for s in &self.series {
            w.write_record([s.method.as_str().to_string(), s.mape.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per checkpoint and method.
    pub fn write_checkpoints_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["percent", "control_time", "method", "edac", "expected_deviation", "p_delay", "anomaly_percentile"])?;
        for row in &self.checkpoints {
            for r in &row.results {
                w.write_record([
                    row.percent.to_string(),
                    row.ad.to_string(),
                    r.method.to_string(),
                    r.edac.to_string(),
                    r.expected_deviation.to_string(),
                    opt(r.p_delay),
                    opt(r.anomaly_percentile),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn forecast_fields(r: &ForecastResult) -> [String; 5] {
    [
        r.method.to_string(),
        r.ad.to_string(),
        r.edac.to_string(),
        opt(r.p_delay),
        opt(r.anomaly_percentile),
    ]
}

fn forecast_at(
    network: &ProjectNetwork,
    log: &TrackingLog,
    method: Method,
    ad: usize,
    stores: &Stores,
    config: &ForecastConfig,
) -> Result<ForecastResult, ForecastError> {
    if method == Method::Esm {
        return esm_at(network, log, ad);
    }
    let measure = method.measure();
    let store = match method {
        Method::Sedm => stores.work,
        _ => stores.cost,
    }
    .ok_or(ForecastError::MissingStore(method, measure))?;
    let snap = ControlSnapshot::from_tracking(network, log, ad, measure)?;
    Ok(stochastic_forecast(network, &snap, store, config)?.result)
}

/// Forecasts every method at every control period of a finished project
/// and scores each series by MAPE against `rd`.
///
/// Each control period gets its own seed (`forecast.seed + AD`), so periods
/// are independent and may run in parallel without changing results.
pub fn run_benchmark(
    network: &ProjectNetwork,
    log: &TrackingLog,
    rd: f64,
    methods: &[Method],
    stores: &Stores,
    config: &BenchmarkConfig,
) -> Result<MapeReport, ForecastError> {
    if !(rd > 0.0) {
        return Err(ForecastError::NonPositiveRd(rd));
    }
    let completion = log.completion_period().ok_or(ForecastError::Incomplete(log.periods()))?;
    let bpd = network.bpd();
    let checkpoint_ads: Vec<usize> = config
        .checkpoints
        .iter()
        .map(|&c| checkpoint_period(c, bpd, completion))
        .collect();

    let mut series = Vec::new();
    for &method in methods {
        let results: Vec<ForecastResult> = (0..=completion)
            .into_par_iter()
            .map(|ad| {
                let anomaly = match config.anomaly {
                    AnomalyMode::Off => false,
                    AnomalyMode::Checkpoints => checkpoint_ads.contains(&ad),
                    AnomalyMode::All => true,
                };
                if ad == 0 && !checkpoint_ads.contains(&0) {
                    return Ok(None);
                }
                let mut cfg = config.forecast.reseeded(config.forecast.seed.wrapping_add(ad as u64));
                cfg.anomaly = anomaly;
                forecast_at(network, log, method, ad, stores, &cfg).map(Some)
            })
            .collect::<Result<Vec<_>, ForecastError>>()?
            .into_iter()
            .flatten()
            .collect();
        let scored: Vec<f64> = results.iter().filter(|r| r.ad >= 1).map(|r| r.edac).collect();
        let mape = mape(rd, &scored)?;
        series.push(MethodSeries { method, results, mape });
    }

    let checkpoints = config
        .checkpoints
        .iter()
        .zip(&checkpoint_ads)
        .map(|(&percent, &ad)| CheckpointRow {
            percent,
            ad,
            results: series
                .iter()
                .filter_map(|s| s.results.iter().find(|r| r.ad == ad).copied())
                .collect(),
        })
        .collect();
    for s in &mut series {
        s.results.retain(|r| r.ad >= 1);
    }
    Ok(MapeReport {
        rd,
        bpd,
        series,
        checkpoints,
    })
}

/// A synthetic "actual execution": durations drawn from the activity
/// distributions, rounded to whole periods (at least one), scheduled
/// early-start and tracked with uniform progress. Returns the log and the
/// realized duration.
pub fn synthetic_execution(network: &ProjectNetwork, seed: u64, id: u64) -> Result<(TrackingLog, f64), ForecastError> {
    let durations: Vec<f64> = realization(network, seed, id)
        .into_iter()
        .map(|d| d.round().max(1.0))
        .collect();
    let schedule = network.forward_pass(&durations)?;
    let log = TrackingLog::from_schedule(network, &schedule);
    Ok((log, schedule.project_duration))
}
