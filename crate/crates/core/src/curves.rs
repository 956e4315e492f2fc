//! Cumulative planned / earned / actual curves for both value measures.
//!
//! With the work-period measure the curves are TPD (planned), TED (earned)
//! and TAD (actual); with the cost measure they are PV, EV and AC. Curves
//! are sampled at integer periods `0..=T`, `value(0) = 0`, and read between
//! periods by linear interpolation.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{ProjectNetwork, Schedule};

/// Unit in which activity value is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueMeasure {
    WorkPeriods,
    Cost,
}

impl ValueMeasure {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueMeasure::WorkPeriods => "work-periods",
            ValueMeasure::Cost => "cost",
        }
    }
}

impl std::str::FromStr for ValueMeasure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "work-periods" => Ok(ValueMeasure::WorkPeriods),
            "cost" => Ok(ValueMeasure::Cost),
            other => Err(format!("unknown value measure '{other}'")),
        }
    }
}

impl std::fmt::Display for ValueMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve must start at 0 and hold at least one period")]
    BadOrigin,
    #[error("curve decreases at period {period}")]
    Decreasing { period: usize },
    #[error("value {value} outside curve range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("activity '{0}' has no cost per period; the cost measure needs one on every activity")]
    MissingCost(String),
    #[error("baseline planned duration must be positive")]
    ZeroBaseline,
    #[error("earned time {ed_t} outside [0, {bpd}]")]
    ProgressOutOfRange { ed_t: f64, bpd: f64 },
    #[error("tracking: unknown activity '{0}'")]
    UnknownActivity(String),
    #[error("tracking period {period}: completion {value} of '{activity}' outside [0, 1]")]
    CompletionRange {
        period: usize,
        activity: String,
        value: f64,
    },
    #[error("tracking period {period}: completion of '{activity}' decreases")]
    CompletionDecreasing { period: usize, activity: String },
    #[error("tracking period {period}: '{activity}' worked without any progress")]
    WorkedWithoutProgress { period: usize, activity: String },
    #[error("tracking period {period}: '{activity}' progressed without being worked")]
    ProgressWithoutWork { period: usize, activity: String },
    #[error("control period {ad} outside tracked range 0..={last}")]
    ControlPeriod { ad: usize, last: usize },
    #[error("malformed curve file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Non-decreasing cumulative series indexed by integer period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeCurve {
    measure: ValueMeasure,
    values: Vec<f64>,
}

impl CumulativeCurve {
    pub fn new(measure: ValueMeasure, values: Vec<f64>) -> Result<Self, CurveError> {
        if values.is_empty() || values[0] != 0.0 {
            return Err(CurveError::BadOrigin);
        }
        if let Some(p) = values.windows(2).position(|w| !(w[1] >= w[0])) {
            return Err(CurveError::Decreasing { period: p + 1 });
        }
        Ok(CumulativeCurve { measure, values })
    }

    pub(crate) fn from_raw(measure: ValueMeasure, values: Vec<f64>) -> Self {
        debug_assert!(values.windows(2).all(|w| w[1] >= w[0]));
        CumulativeCurve { measure, values }
    }

    pub fn measure(&self) -> ValueMeasure {
        self.measure
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Last period index `T`.
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("non-empty curve")
    }

    /// Linear interpolation at real time `t`, clamped to `[0, T]`.
    pub fn value_at(&self, t: f64) -> f64 {
        interpolate(&self.values, t)
    }

    /// Time at which the curve reaches `earned`; see [`earned_time`].
    pub fn time_of(&self, earned: f64) -> Result<f64, CurveError> {
        earned_time(self, earned)
    }

    /// Writes `# measure: <m>` followed by `period,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CurveError> {
        let mut out = out;
        writeln!(out, "# measure: {}", self.measure)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["period", "value"]).map_err(csv_err)?;
        for (p, v) in self.values.iter().enumerate() {
            w.write_record([p.to_string(), v.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self, CurveError> {
        let mut header = String::new();
        input.read_line(&mut header)?;
        let measure = header
            .trim()
            .strip_prefix("# measure:")
            .ok_or_else(|| CurveError::Format("missing '# measure:' header".into()))?
            .trim()
            .parse::<ValueMeasure>()
            .map_err(CurveError::Format)?;
        let mut r = csv::Reader::from_reader(input);
        let mut values = Vec::new();
        for (expected, row) in r.records().enumerate() {
            let row = row.map_err(csv_err)?;
            let period: usize = field(&row, 0)?;
            if period != expected {
                return Err(CurveError::Format(format!(
                    "expected period {expected}, found {period}"
                )));
            }
            values.push(field::<f64>(&row, 1)?);
        }
        CumulativeCurve::new(measure, values)
    }
}

fn csv_err(e: csv::Error) -> CurveError {
    CurveError::Format(e.to_string())
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Result<T, CurveError> {
    row.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| CurveError::Format(format!("bad field {i} in row {row:?}")))
}

pub(crate) fn interpolate(values: &[f64], t: f64) -> f64 {
    let last = values.len() - 1;
    if t <= 0.0 {
        return values[0];
    }
    if t >= last as f64 {
        return values[last];
    }
    let lo = t.floor() as usize;
    let frac = t - lo as f64;
    if frac == 0.0 {
        return values[lo];
    }
    values[lo] + frac * (values[lo + 1] - values[lo])
}

/// Slack allowed when an earned value sits a rounding error outside a curve.
const RANGE_SLACK: f64 = 1e-9;

/// Inverse interpolation: the real time at which `curve` reaches `earned`.
///
/// With `t` the last period whose value does not exceed `earned`, the result
/// is `t + (earned - v(t)) / (v(t+1) - v(t))`. Taking the *last* such period
/// skips flat stretches. Reaching the final value returns the horizon `T`.
pub fn earned_time(curve: &CumulativeCurve, earned: f64) -> Result<f64, CurveError> {
    earned_time_in(&curve.values, earned)
}

pub(crate) fn earned_time_in(values: &[f64], earned: f64) -> Result<f64, CurveError> {
    let last = values.len() - 1;
    let hi = values[last];
    let lo = values[0];
    let slack = RANGE_SLACK * hi.abs().max(1.0);
    if !(earned >= lo - slack && earned <= hi + slack) {
        return Err(CurveError::OutOfRange {
            value: earned,
            lo,
            hi,
        });
    }
    if earned >= hi {
        return Ok(last as f64);
    }
    let earned = earned.max(lo);
    // First index whose value exceeds `earned`; `earned < hi` keeps it in range.
    let above = values.partition_point(|&v| v <= earned);
    let t = above - 1;
    Ok(t as f64 + (earned - values[t]) / (values[above] - values[t]))
}

/// Ratio of earned time to baseline planned duration.
pub fn ppi(ed_t: f64, bpd: f64) -> Result<f64, CurveError> {
    if bpd <= 0.0 {
        return Err(CurveError::ZeroBaseline);
    }
    if !(ed_t >= 0.0 && ed_t <= bpd * (1.0 + RANGE_SLACK)) {
        return Err(CurveError::ProgressOutOfRange { ed_t, bpd });
    }
    Ok((ed_t / bpd).min(1.0))
}

/// Earned-schedule duration forecast `AD + (BPD - ES) / SPI(t)` with
/// `SPI(t) = ES / AD`. Falls back to the plan before any time or progress.
pub fn esm_forecast(ad: f64, es: f64, bpd: f64) -> f64 {
    if ad <= 0.0 || es <= 0.0 {
        return bpd;
    }
    ad + (bpd - es) / (es / ad)
}

/// Per-period value weight of every activity under `measure`.
pub fn weights(network: &ProjectNetwork, measure: ValueMeasure) -> Result<Vec<f64>, CurveError> {
    network
        .activities()
        .iter()
        .map(|a| match measure {
            ValueMeasure::WorkPeriods => Ok(1.0),
            ValueMeasure::Cost => a
                .cost_per_period
                .ok_or_else(|| CurveError::MissingCost(a.id.clone())),
        })
        .collect()
}

fn horizon_of(duration: f64) -> usize {
    (duration.ceil().max(1.0)) as usize
}

/// Time activity `i` has been worked by time `t`.
#[inline]
fn worked_by(t: f64, start: f64, finish: f64, duration: f64) -> f64 {
    if t >= finish {
        duration
    } else if t <= start {
        0.0
    } else {
        t - start
    }
}

/// Completion fraction of an activity at time `t`; exactly 1 once finished.
#[inline]
fn fraction_by(t: f64, start: f64, finish: f64, duration: f64) -> f64 {
    if t >= finish {
        1.0
    } else if t <= start {
        0.0
    } else {
        (t - start) / duration
    }
}

/// Planned cumulative curve of the baseline schedule: each planned period of
/// activity `i` contributes 1 (or its cost rate).
pub fn planned_curve(
    network: &ProjectNetwork,
    baseline: &Schedule,
    measure: ValueMeasure,
) -> Result<CumulativeCurve, CurveError> {
    let w = weights(network, measure)?;
    let horizon = horizon_of(baseline.project_duration);
    let values = (0..=horizon)
        .map(|p| {
            let t = p as f64;
            (0..network.len())
                .map(|i| {
                    let d = baseline.finish[i] - baseline.start[i];
                    w[i] * worked_by(t, baseline.start[i], baseline.finish[i], d)
                })
                .sum()
        })
        .collect();
    Ok(CumulativeCurve::from_raw(measure, values))
}

/// Earned and actual curves of one realized execution.
///
/// Activity `i` earns `PD_i / AD_i` (times its cost rate under the cost
/// measure) per period worked and accrues actual value per period worked,
/// with the final partial period counted fractionally.
pub fn realized_curves(
    network: &ProjectNetwork,
    durations: &[f64],
    schedule: &Schedule,
    measure: ValueMeasure,
) -> Result<(CumulativeCurve, CumulativeCurve), CurveError> {
    let w = weights(network, measure)?;
    let (earned, actual) = realized_values(network, &w, durations, schedule);
    Ok((
        CumulativeCurve::from_raw(measure, earned),
        CumulativeCurve::from_raw(measure, actual),
    ))
}

pub(crate) fn realized_values(
    network: &ProjectNetwork,
    weights: &[f64],
    durations: &[f64],
    schedule: &Schedule,
) -> (Vec<f64>, Vec<f64>) {
    let horizon = horizon_of(schedule.project_duration);
    let planned: Vec<f64> = network.planned_durations();
    let mut earned = Vec::with_capacity(horizon + 1);
    let mut actual = Vec::with_capacity(horizon + 1);
    for p in 0..=horizon {
        let t = p as f64;
        let mut e = 0.0;
        let mut a = 0.0;
        for i in 0..network.len() {
            let (s, f, d) = (schedule.start[i], schedule.finish[i], durations[i]);
            e += weights[i] * planned[i] * fraction_by(t, s, f, d);
            a += weights[i] * worked_by(t, s, f, d);
        }
        earned.push(e);
        actual.push(a);
    }
    (earned, actual)
}

/// One tracked activity in one control period.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgressEntry {
    pub activity: String,
    pub worked: bool,
    /// Cumulative completion fraction at the end of the period.
    pub complete: f64,
}

/// Period-by-period progress of an executing project. Period `p` (1-based)
/// covers the time interval `[p - 1, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingLog {
    worked: Vec<Vec<bool>>,
    complete: Vec<Vec<f64>>,
}

impl TrackingLog {
    /// Builds a log from per-period entries (`periods[0]` is period 1).
    /// Activities absent from a period keep their completion and are idle.
    pub fn from_periods(
        network: &ProjectNetwork,
        periods: &[Vec<ProgressEntry>],
    ) -> Result<Self, CurveError> {
        let n = network.len();
        let mut prev = vec![0.0; n];
        let mut worked_all = Vec::with_capacity(periods.len());
        let mut complete_all = Vec::with_capacity(periods.len());
        for (k, entries) in periods.iter().enumerate() {
            let period = k + 1;
            let mut worked = vec![false; n];
            let mut complete = prev.clone();
            for e in entries {
                let i = network
                    .index_of(&e.activity)
                    .ok_or_else(|| CurveError::UnknownActivity(e.activity.clone()))?;
                if !(0.0..=1.0).contains(&e.complete) {
                    return Err(CurveError::CompletionRange {
                        period,
                        activity: e.activity.clone(),
                        value: e.complete,
                    });
                }
                worked[i] = e.worked;
                complete[i] = e.complete;
            }
            for i in 0..n {
                let id = || network.activities()[i].id.clone();
                if complete[i] < prev[i] {
                    return Err(CurveError::CompletionDecreasing { period, activity: id() });
                }
                let progressed = complete[i] > prev[i];
                if worked[i] && !progressed {
                    return Err(CurveError::WorkedWithoutProgress { period, activity: id() });
                }
                if progressed && !worked[i] {
                    return Err(CurveError::ProgressWithoutWork { period, activity: id() });
                }
            }
            prev.clone_from(&complete);
            worked_all.push(worked);
            complete_all.push(complete);
        }
        Ok(TrackingLog {
            worked: worked_all,
            complete: complete_all,
        })
    }

    /// Uniform-progress log of a realized schedule, tracked until completion.
    pub fn from_schedule(network: &ProjectNetwork, schedule: &Schedule) -> Self {
        let horizon = horizon_of(schedule.project_duration);
        let n = network.len();
        let mut worked = Vec::with_capacity(horizon);
        let mut complete = Vec::with_capacity(horizon);
        for p in 1..=horizon {
            let (t0, t1) = ((p - 1) as f64, p as f64);
            let mut w = vec![false; n];
            let mut c = vec![0.0; n];
            for i in 0..n {
                let (s, f) = (schedule.start[i], schedule.finish[i]);
                w[i] = s < t1 && f > t0;
                c[i] = fraction_by(t1, s, f, f - s);
            }
            worked.push(w);
            complete.push(c);
        }
        TrackingLog { worked, complete }
    }

    /// Number of tracked periods.
    pub fn periods(&self) -> usize {
        self.worked.len()
    }

    pub fn worked(&self, period: usize) -> &[bool] {
        &self.worked[period - 1]
    }

    pub fn complete(&self, period: usize) -> &[f64] {
        &self.complete[period - 1]
    }

    /// First period at the end of which every activity is finished.
    pub fn completion_period(&self) -> Option<usize> {
        self.complete
            .iter()
            .position(|c| c.iter().all(|&x| x == 1.0))
            .map(|k| k + 1)
    }

    /// `(earned, actual)` at the end of control period `ad` (0 = start).
    pub fn values_at(
        &self,
        network: &ProjectNetwork,
        ad: usize,
        measure: ValueMeasure,
    ) -> Result<(f64, f64), CurveError> {
        if ad > self.periods() {
            return Err(CurveError::ControlPeriod {
                ad,
                last: self.periods(),
            });
        }
        let w = weights(network, measure)?;
        if ad == 0 {
            return Ok((0.0, 0.0));
        }
        let planned = network.planned_durations();
        let earned = self.complete[ad - 1]
            .iter()
            .enumerate()
            .map(|(i, c)| w[i] * planned[i] * c)
            .sum();
        let actual = self.worked[..ad]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &on)| on)
                    .map(|(i, _)| w[i])
                    .sum::<f64>()
            })
            .sum();
        Ok((earned, actual))
    }
}

/// Earned and actual curves of a tracked project over periods `0..=T`:
/// earned `= sum PD_i * pc_i(p)` and actual counts one period per worked
/// activity (each scaled by the cost rate under the cost measure).
pub fn tracking_curves(
    network: &ProjectNetwork,
    log: &TrackingLog,
    measure: ValueMeasure,
) -> Result<(CumulativeCurve, CumulativeCurve), CurveError> {
    let w = weights(network, measure)?;
    let planned = network.planned_durations();
    let mut earned = vec![0.0];
    let mut actual = vec![0.0];
    let mut acc = 0.0;
    for p in 1..=log.periods() {
        let e = log
            .complete(p)
            .iter()
            .enumerate()
            .map(|(i, c)| w[i] * planned[i] * c)
            .sum();
        acc += log
            .worked(p)
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| w[i])
            .sum::<f64>();
        earned.push(e);
        actual.push(acc);
    }
    Ok((
        CumulativeCurve::from_raw(measure, earned),
        CumulativeCurve::from_raw(measure, actual),
    ))
}

/// State of the executing project at an integer control period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlSnapshot {
    pub measure: ValueMeasure,
    /// Control period AD.
    pub ad: usize,
    /// Actual value spent up to AD (TAD or AC).
    pub actual: f64,
    /// Earned value at AD (TED or EV).
    pub earned: f64,
    /// Time on the planned curve matching `earned` (ED(t) or ES).
    pub earned_time: f64,
    pub ppi: f64,
    /// True when every activity is finished at AD.
    pub complete: bool,
}

impl ControlSnapshot {
    pub fn from_tracking(
        network: &ProjectNetwork,
        log: &TrackingLog,
        ad: usize,
        measure: ValueMeasure,
    ) -> Result<Self, CurveError> {
        let (earned, actual) = log.values_at(network, ad, measure)?;
        let baseline = network.baseline_schedule();
        let planned = planned_curve(network, &baseline, measure)?;
        let ed_t = earned_time(&planned, earned)?;
        let complete = ad > 0 && log.complete(ad).iter().all(|&c| c == 1.0);
        Ok(ControlSnapshot {
            measure,
            ad,
            actual,
            earned,
            earned_time: ed_t,
            ppi: ppi(ed_t, baseline.project_duration)?,
            complete,
        })
    }
}
