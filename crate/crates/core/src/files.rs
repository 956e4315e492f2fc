//! TOML project and tracking files.
//!
//! Project file:
//!
//! ```toml
//! name = "Warehouse"
//! bpd = 126                # optional; checked against the computed schedule
//!
//! [[activity]]
//! id = "A01"
//! name = "Site preparation"
//! predecessors = []
//! pd = 6
//! relation = "FS"          # optional; finish-to-start is the only relation
//! cost_per_period = 1200.0 # optional
//! distribution = { type = "triangular", optimistic = 5.0, most_likely = 6.0, pessimistic = 8.0 }
//! ```
//!
//! Distribution types: `triangular`, `uniform` (`lo`, `hi`), `normal`
//! (`mean`, `sd`) and `discrete` (`atoms = [[value, probability], ...]`).
//!
//! Tracking file, one table per control period in order from 1; activities
//! not listed are idle and keep their completion:
//!
//! ```toml
//! [[period]]
//! period = 1
//! progress = [{ activity = "A01", complete = 0.2 }]   # worked defaults to true
//! ```

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::curves::{CurveError, ProgressEntry, TrackingLog};
use crate::network::{Activity, DurationDistribution, NetworkError, ProjectNetwork};

/// A parse or validation failure, anchored to a line where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct FileError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}:", p.display())?;
        }
        if let Some(l) = self.line {
            write!(f, "{l}:")?;
            if let Some(c) = self.column {
                write!(f, "{c}:")?;
            }
        }
        if self.path.is_some() || self.line.is_some() {
            f.write_str(" ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for FileError {}

/// 1-based line and column of a byte offset.
fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn anchored(text: &str, span: Option<Range<usize>>, message: impl Into<String>) -> FileError {
    let (line, column) = match span {
        Some(s) => {
            let (l, c) = position(text, s.start);
            (Some(l), Some(c))
        }
        None => (None, None),
    };
    FileError {
        path: None,
        line,
        column,
        message: message.into(),
    }
}

fn toml_error(text: &str, e: toml::de::Error) -> FileError {
    anchored(text, e.span(), e.message().trim().to_string())
}

fn read(path: &Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|e| FileError {
        path: Some(path.to_path_buf()),
        line: None,
        column: None,
        message: e.to_string(),
    })
}

fn with_path(path: &Path) -> impl Fn(FileError) -> FileError + '_ {
    move |mut e| {
        e.path = Some(path.to_path_buf());
        e
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProject {
    name: String,
    bpd: Option<Spanned<f64>>,
    #[serde(rename = "activity", default)]
    activities: Vec<Spanned<RawActivity>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawActivity {
    id: String,
    name: Option<String>,
    #[serde(default)]
    predecessors: Vec<String>,
    pd: u32,
    relation: Option<Spanned<String>>,
    distribution: DurationDistribution,
    cost_per_period: Option<f64>,
}

/// A parsed project: the network plus the declared BPD, if any.
#[derive(Debug, Clone)]
pub struct ProjectFile {
    pub network: ProjectNetwork,
    pub declared_bpd: Option<f64>,
}

pub fn parse_project(text: &str) -> Result<ProjectFile, FileError> {
    let raw: RawProject = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let mut spans = Vec::new();
    let mut activities = Vec::new();
    for a in raw.activities {
        let span = a.span();
        let a = a.into_inner();
        if let Some(rel) = &a.relation {
            if rel.get_ref() != "FS" {
                return Err(anchored(
                    text,
                    Some(rel.span()),
                    format!("activity '{}': only finish-to-start (\"FS\") precedence is supported, got \"{}\"", a.id, rel.get_ref()),
                ));
            }
        }
        spans.push((a.id.clone(), span));
        activities.push(Activity {
            name: a.name.unwrap_or_else(|| a.id.clone()),
            id: a.id,
            predecessors: a.predecessors,
            planned_duration: a.pd,
            distribution: a.distribution,
            cost_per_period: a.cost_per_period,
        });
    }
    let network = ProjectNetwork::new(raw.name, activities).map_err(|e| match e {
        NetworkError::Invalid(report) => {
            let first = &report.violations[0];
            let span = first
                .activity()
                .and_then(|id| spans.iter().find(|(s, _)| s == id))
                .map(|(_, s)| s.clone());
            let mut msg = first.to_string();
            if report.violations.len() > 1 {
                msg.push_str(&format!(" (and {} more problems)", report.violations.len() - 1));
            }
            anchored(text, span, msg)
        }
        other => anchored(text, None, other.to_string()),
    })?;
    let declared_bpd = match raw.bpd {
        Some(b) => {
            let computed = network.bpd();
            if (b.get_ref() - computed).abs() > 1e-9 * computed.max(1.0) {
                return Err(anchored(
                    text,
                    Some(b.span()),
                    format!("declared bpd {} disagrees with the scheduled duration {computed}", b.get_ref()),
                ));
            }
            Some(*b.get_ref())
        }
        None => None,
    };
    Ok(ProjectFile { network, declared_bpd })
}

pub fn load_project(path: &Path) -> Result<ProjectFile, FileError> {
    parse_project(&read(path)?).map_err(with_path(path))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTracking {
    #[serde(rename = "period", default)]
    periods: Vec<Spanned<RawPeriod>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPeriod {
    period: usize,
    #[serde(default)]
    progress: Vec<RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    activity: String,
    #[serde(default = "yes")]
    worked: bool,
    complete: f64,
}

fn yes() -> bool {
    true
}

pub fn parse_tracking(text: &str, network: &ProjectNetwork) -> Result<TrackingLog, FileError> {
    let raw: RawTracking = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let mut spans = Vec::new();
    let mut periods = Vec::new();
    for (k, p) in raw.periods.into_iter().enumerate() {
        let span = p.span();
        let p = p.into_inner();
        if p.period != k + 1 {
            return Err(anchored(
                text,
                Some(span),
                format!("periods must run 1, 2, 3, ... in order; expected period {}, found {}", k + 1, p.period),
            ));
        }
        spans.push(span);
        periods.push(
            p.progress
                .into_iter()
                .map(|e| ProgressEntry {
                    activity: e.activity,
                    worked: e.worked,
                    complete: e.complete,
                })
                .collect::<Vec<_>>(),
        );
    }
    TrackingLog::from_periods(network, &periods).map_err(|e| {
        let period = match &e {
            CurveError::CompletionRange { period, .. }
            | CurveError::CompletionDecreasing { period, .. }
            | CurveError::WorkedWithoutProgress { period, .. }
            | CurveError::ProgressWithoutWork { period, .. } => Some(*period),
            _ => None,
        };
        let span = period.and_then(|p| spans.get(p - 1).cloned());
        anchored(text, span, e.to_string())
    })
}

pub fn load_tracking(path: &Path, network: &ProjectNetwork) -> Result<TrackingLog, FileError> {
    parse_tracking(&read(path)?, network).map_err(with_path(path))
}

/// Serializes a log in the tracking file format, listing per period every
/// activity that worked or changed.
pub fn write_tracking(network: &ProjectNetwork, log: &TrackingLog) -> String {
    let mut out = String::new();
    let mut prev = vec![0.0; network.len()];
    for p in 1..=log.periods() {
        out.push_str(&format!("[[period]]\nperiod = {p}\nprogress = [\n"));
        for (i, a) in network.activities().iter().enumerate() {
            let (w, c) = (log.worked(p)[i], log.complete(p)[i]);
            if w || c != prev[i] {
                out.push_str(&format!(
                    "  {{ activity = {}, worked = {w}, complete = {c:?} }},\n",
                    toml_string(&a.id)
                ));
            }
            prev[i] = c;
        }
        out.push_str("]\n\n");
    }
    out
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}
