//! Project definition and precedence analytics.
//!
//! A [`ProjectNetwork`] is an activity-on-node DAG with finish-to-start,
//! zero-lag precedence. Every activity carries a deterministic planned
//! duration (integer work periods) used for the baseline, and a duration
//! distribution used by the simulator.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Random activity duration, in work periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DurationDistribution {
    /// Three-point estimate. `optimistic == most_likely == pessimistic` is
    /// accepted as a point mass.
    Triangular {
        optimistic: f64,
        most_likely: f64,
        pessimistic: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Normal truncated to `[MIN_NORMAL_DURATION, inf)`.
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Finite support: `(value, probability)` atoms.
    Discrete {
        atoms: Vec<(f64, f64)>,
    },
}

/// Lower truncation point of normal durations.
pub const MIN_NORMAL_DURATION: f64 = 0.01;

impl DurationDistribution {
    pub fn fixed(value: f64) -> Self {
        DurationDistribution::Triangular {
            optimistic: value,
            most_likely: value,
            pessimistic: value,
        }
    }

    /// Returns a description of the first violated parameter constraint.
    pub fn check(&self) -> Result<(), String> {
        let finite = |v: f64| v.is_finite();
        match *self {
            DurationDistribution::Triangular {
                optimistic: a,
                most_likely: m,
                pessimistic: b,
            } => {
                if !(finite(a) && finite(m) && finite(b)) {
                    return Err("triangular parameters must be finite".into());
                }
                if !(a <= m && m <= b) {
                    return Err(format!(
                        "triangular parameters out of order: need optimistic <= most_likely <= pessimistic, got ({a}, {m}, {b})"
                    ));
                }
                if a == b && (a != m) {
                    return Err("triangular with optimistic == pessimistic must be a point mass".into());
                }
                if a <= 0.0 {
                    return Err(format!("triangular optimistic duration must be positive, got {a}"));
                }
                Ok(())
            }
            DurationDistribution::Uniform { lo, hi } => {
                if !(finite(lo) && finite(hi)) {
                    return Err("uniform bounds must be finite".into());
                }
                if lo >= hi {
                    return Err(format!("uniform requires lo < hi, got ({lo}, {hi})"));
                }
                if lo <= 0.0 {
                    return Err(format!("uniform lower bound must be positive, got {lo}"));
                }
                Ok(())
            }
            DurationDistribution::Normal { mean, sd } => {
                if !(finite(mean) && finite(sd)) {
                    return Err("normal parameters must be finite".into());
                }
                if sd <= 0.0 {
                    return Err(format!("normal sd must be positive, got {sd}"));
                }
                Ok(())
            }
            DurationDistribution::Discrete { ref atoms } => {
                if atoms.is_empty() {
                    return Err("discrete distribution has no atoms".into());
                }
                let mut total = 0.0;
                for &(value, p) in atoms {
                    if !(finite(value) && value > 0.0) {
                        return Err(format!("discrete value must be positive, got {value}"));
                    }
                    if !(finite(p) && p >= 0.0) {
                        return Err(format!("discrete probability must be non-negative, got {p}"));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(format!("discrete probabilities sum to {total}, expected 1"));
                }
                Ok(())
            }
        }
    }

    /// Support bounds `(lo, hi)` of the distribution.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            DurationDistribution::Triangular {
                optimistic,
                pessimistic,
                ..
            } => (optimistic, pessimistic),
            DurationDistribution::Uniform { lo, hi } => (lo, hi),
            DurationDistribution::Normal { .. } => (MIN_NORMAL_DURATION, f64::INFINITY),
            DurationDistribution::Discrete { ref atoms } => atoms
                .iter()
                .filter(|a| a.1 > 0.0)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(v, _)| {
                    (lo.min(v), hi.max(v))
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub id: String,
    pub name: String,
    pub predecessors: Vec<String>,
    /// Planned duration in whole work periods.
    pub planned_duration: u32,
    pub distribution: DurationDistribution,
    pub cost_per_period: Option<f64>,
}

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    DuplicateId(String),
    EmptyId,
    ZeroPlannedDuration(String),
    UnknownPredecessor { activity: String, predecessor: String },
    SelfReference(String),
    DuplicatePredecessor { activity: String, predecessor: String },
    Cycle { from: String, to: String },
    Distribution { activity: String, reason: String },
    Cost { activity: String, reason: String },
}

impl Violation {
    /// Activity the violation is anchored to, if any.
    pub fn activity(&self) -> Option<&str> {
        match self {
            Violation::Empty | Violation::EmptyId => None,
            Violation::DuplicateId(id)
            | Violation::ZeroPlannedDuration(id)
            | Violation::SelfReference(id) => Some(id),
            Violation::UnknownPredecessor { activity, .. }
            | Violation::DuplicatePredecessor { activity, .. }
            | Violation::Distribution { activity, .. }
            | Violation::Cost { activity, .. } => Some(activity),
            Violation::Cycle { from, .. } => Some(from),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "project has no activities"),
            Violation::EmptyId => write!(f, "activity with empty id"),
            Violation::DuplicateId(id) => write!(f, "duplicate activity id '{id}'"),
            Violation::ZeroPlannedDuration(id) => {
                write!(f, "activity '{id}': planned duration must be at least 1")
            }
            Violation::UnknownPredecessor {
                activity,
                predecessor,
            } => write!(f, "activity '{activity}': unknown predecessor '{predecessor}'"),
            Violation::SelfReference(id) => write!(f, "activity '{id}' lists itself as predecessor"),
            Violation::DuplicatePredecessor {
                activity,
                predecessor,
            } => write!(f, "activity '{activity}': predecessor '{predecessor}' listed twice"),
            Violation::Cycle { from, to } => {
                write!(f, "precedence cycle through edge '{from}' -> '{to}'")
            }
            Violation::Distribution { activity, reason } => {
                write!(f, "activity '{activity}': {reason}")
            }
            Violation::Cost { activity, reason } => write!(f, "activity '{activity}': {reason}"),
        }
    }
}

/// Result of [`validate`]; empty iff the activity list forms a valid network.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("invalid project network:\n{0}")]
    Invalid(ValidationReport),
    #[error("expected {expected} durations, got {got}")]
    DurationCount { expected: usize, got: usize },
    #[error("duration of activity '{0}' must be positive and finite")]
    NonPositiveDuration(String),
    #[error("serial/parallel indicator undefined for a single-activity network")]
    SingleActivity,
    #[error("serial/parallel indicator needs 1 <= n_s <= n_t, got n_s = {n_s}, n_t = {n_t}")]
    LevelCount { n_s: usize, n_t: usize },
}

/// Checks every structural invariant of an activity list.
pub fn validate(activities: &[Activity]) -> ValidationReport {
    let mut violations = Vec::new();
    if activities.is_empty() {
        violations.push(Violation::Empty);
        return ValidationReport { violations };
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, a) in activities.iter().enumerate() {
        if a.id.trim().is_empty() {
            violations.push(Violation::EmptyId);
        } else if index.insert(a.id.as_str(), i).is_some() {
            violations.push(Violation::DuplicateId(a.id.clone()));
        }
    }

    for a in activities {
        if a.planned_duration == 0 {
            violations.push(Violation::ZeroPlannedDuration(a.id.clone()));
        }
        if let Err(reason) = a.distribution.check() {
            violations.push(Violation::Distribution {
                activity: a.id.clone(),
                reason,
            });
        }
        if let Some(c) = a.cost_per_period {
            if !(c.is_finite() && c >= 0.0) {
                violations.push(Violation::Cost {
                    activity: a.id.clone(),
                    reason: format!("cost per period must be non-negative, got {c}"),
                });
            }
        }
        let mut seen = Vec::new();
        for p in &a.predecessors {
            if p == &a.id {
                violations.push(Violation::SelfReference(a.id.clone()));
            } else if !index.contains_key(p.as_str()) {
                violations.push(Violation::UnknownPredecessor {
                    activity: a.id.clone(),
                    predecessor: p.clone(),
                });
            } else if seen.contains(&p) {
                violations.push(Violation::DuplicatePredecessor {
                    activity: a.id.clone(),
                    predecessor: p.clone(),
                });
            }
            seen.push(p);
        }
    }

    // Cycle search over the resolvable, non-self edges only.
    let preds: Vec<Vec<usize>> = activities
        .iter()
        .map(|a| {
            a.predecessors
                .iter()
                .filter(|p| *p != &a.id)
                .filter_map(|p| index.get(p.as_str()).copied())
                .collect()
        })
        .collect();
    if let Err((from, to)) = topological_order(&preds) {
        violations.push(Violation::Cycle {
            from: activities[from].id.clone(),
            to: activities[to].id.clone(),
        });
    }

    ValidationReport { violations }
}

/// Kahn's algorithm. On failure returns one edge `(from, to)` lying on a cycle.
fn topological_order(preds: &[Vec<usize>]) -> Result<Vec<usize>, (usize, usize)> {
    let n = preds.len();
    let mut succs = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for (i, ps) in preds.iter().enumerate() {
        for &p in ps {
            succs[p].push(i);
            indegree[i] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).rev().collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &s in succs[i].iter().rev() {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(s);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }

    // Every leftover node has a leftover predecessor, so walking predecessors
    // from any leftover node must revisit a node; that revisit closes a cycle.
    let leftover: Vec<bool> = indegree.iter().map(|&d| d > 0).collect();
    let start = leftover.iter().position(|&l| l).expect("leftover node");
    let mut visited_at = vec![usize::MAX; n];
    let mut path = vec![start];
    visited_at[start] = 0;
    let mut node = start;
    loop {
        let pred = *preds[node]
            .iter()
            .find(|&&p| leftover[p])
            .expect("leftover node keeps a leftover predecessor");
        if visited_at[pred] != usize::MAX {
            return Err((pred, node));
        }
        visited_at[pred] = path.len();
        path.push(pred);
        node = pred;
    }
}

/// Progressive level of each activity (1 for activities without
/// predecessors) and the network depth `n_s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Levels {
    pub per_activity: Vec<usize>,
    pub depth: usize,
}

/// Earliest-start schedule; times are in work periods from project start and
/// each activity occupies `[start, finish)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub start: Vec<f64>,
    pub finish: Vec<f64>,
    pub project_duration: f64,
}

/// A validated activity network. Construction enforces every invariant, so
/// the analytics below are infallible for valid durations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectNetwork {
    name: String,
    activities: Vec<Activity>,
    #[serde(skip)]
    preds: Vec<Vec<usize>>,
    #[serde(skip)]
    topo: Vec<usize>,
}

impl ProjectNetwork {
    pub fn new(name: impl Into<String>, activities: Vec<Activity>) -> Result<Self, NetworkError> {
        let report = validate(&activities);
        if !report.is_empty() {
            return Err(NetworkError::Invalid(report));
        }
        let index: HashMap<&str, usize> = activities
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id.as_str(), i))
            .collect();
        let preds: Vec<Vec<usize>> = activities
            .iter()
            .map(|a| a.predecessors.iter().map(|p| index[p.as_str()]).collect())
            .collect();
        let topo = topological_order(&preds).expect("validated network is acyclic");
        Ok(ProjectNetwork {
            name: name.into(),
            activities,
            preds,
            topo,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn activities(&self) -> &[Activity] {
        &self.activities
    }

    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.activities.iter().position(|a| a.id == id)
    }

    /// Predecessor indices of activity `i`.
    pub fn predecessors(&self, i: usize) -> &[usize] {
        &self.preds[i]
    }

    /// Activity indices in a topological order.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// `n_t`: number of activities.
    pub fn activity_count(&self) -> usize {
        self.activities.len()
    }

    /// Sum of planned durations (final value of the planned work-period curve).
    pub fn total_planned_duration(&self) -> f64 {
        self.activities
            .iter()
            .map(|a| f64::from(a.planned_duration))
            .sum()
    }

    /// Budget at completion: sum of `planned_duration * cost_per_period`.
    /// `None` if any activity lacks a cost rate.
    pub fn budget_at_completion(&self) -> Option<f64> {
        self.activities
            .iter()
            .map(|a| a.cost_per_period.map(|c| c * f64::from(a.planned_duration)))
            .sum()
    }

    pub fn has_costs(&self) -> bool {
        self.activities.iter().all(|a| a.cost_per_period.is_some())
    }

    pub fn planned_durations(&self) -> Vec<f64> {
        self.activities
            .iter()
            .map(|a| f64::from(a.planned_duration))
            .collect()
    }

    pub fn progressive_levels(&self) -> Levels {
        let mut level = vec![0usize; self.len()];
        for &i in &self.topo {
            level[i] = 1 + self.preds[i].iter().map(|&p| level[p]).max().unwrap_or(0);
        }
        let depth = level.iter().copied().max().unwrap_or(0);
        Levels {
            per_activity: level,
            depth,
        }
    }

    /// Serial/parallel indicator of this network from its progressive depth.
    pub fn serial_parallel(&self) -> Result<f64, NetworkError> {
        serial_parallel_indicator(self.progressive_levels().depth, self.activity_count())
    }

    pub fn forward_pass(&self, durations: &[f64]) -> Result<Schedule, NetworkError> {
        if durations.len() != self.len() {
            return Err(NetworkError::DurationCount {
                expected: self.len(),
                got: durations.len(),
            });
        }
        if let Some(i) = durations.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(NetworkError::NonPositiveDuration(self.activities[i].id.clone()));
        }
        Ok(self.forward_pass_unchecked(durations))
    }

    pub(crate) fn forward_pass_unchecked(&self, durations: &[f64]) -> Schedule {
        let n = self.len();
        let mut start = vec![0.0; n];
        let mut finish = vec![0.0; n];
        for &i in &self.topo {
            let s = self.preds[i]
                .iter()
                .map(|&p| finish[p])
                .fold(0.0_f64, f64::max);
            start[i] = s;
            finish[i] = s + durations[i];
        }
        let project_duration = finish.iter().copied().fold(0.0_f64, f64::max);
        Schedule {
            start,
            finish,
            project_duration,
        }
    }

    /// Forward pass on planned durations; `project_duration` is the BPD.
    pub fn baseline_schedule(&self) -> Schedule {
        self.forward_pass_unchecked(&self.planned_durations())
    }

    /// Baseline planned duration.
    pub fn bpd(&self) -> f64 {
        self.baseline_schedule().project_duration
    }

    /// Hex SHA-256 over the canonical JSON form of the definition.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("network serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

/// `(n_s - 1) / (n_t - 1)`: 1 for a pure chain, 0 for fully parallel.
pub fn serial_parallel_indicator(n_s: usize, n_t: usize) -> Result<f64, NetworkError> {
    if n_t < 2 {
        return Err(NetworkError::SingleActivity);
    }
    if n_s < 1 || n_s > n_t {
        return Err(NetworkError::LevelCount { n_s, n_t });
    }
    Ok((n_s - 1) as f64 / (n_t - 1) as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn act(id: &str, preds: &[&str], pd: u32) -> Activity {
        Activity {
            id: id.into(),
            name: id.into(),
            predecessors: preds.iter().map(|s| s.to_string()).collect(),
            planned_duration: pd,
            distribution: DurationDistribution::fixed(f64::from(pd)),
            cost_per_period: None,
        }
    }

    pub(crate) fn chain(pds: &[u32]) -> ProjectNetwork {
        let acts = pds
            .iter()
            .enumerate()
            .map(|(i, &pd)| {
                let prev = format!("A{}", i);
                let preds: Vec<&str> = if i == 0 { vec![] } else { vec![prev.as_str()] };
                act(&format!("A{}", i + 1), &preds, pd)
            })
            .collect();
        ProjectNetwork::new("chain", acts).unwrap()
    }

    fn diamond(pds: [u32; 4]) -> ProjectNetwork {
        ProjectNetwork::new(
            "diamond",
            vec![
                act("A", &[], pds[0]),
                act("B", &["A"], pds[1]),
                act("C", &["A"], pds[2]),
                act("D", &["B", "C"], pds[3]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn valid_chain_has_empty_report() {
        let mut a = act("A", &[], 3);
        a.distribution = DurationDistribution::Triangular {
            optimistic: 2.0,
            most_likely: 3.0,
            pessimistic: 5.0,
        };
        let b = act("B", &["A"], 2);
        assert!(validate(&[a, b]).is_empty());
    }

    #[test]
    fn two_cycle_is_named() {
        let report = validate(&[act("A", &["B"], 1), act("B", &["A"], 1)]);
        assert_eq!(report.violations.len(), 1);
        match &report.violations[0] {
            Violation::Cycle { from, to } => {
                let mut ends = vec![from.as_str(), to.as_str()];
                ends.sort();
                assert_eq!(ends, ["A", "B"]);
            }
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn cycle_edge_lies_on_cycle() {
        // X feeds the cycle B -> C -> D -> B but is not on it.
        let report = validate(&[
            act("X", &[], 1),
            act("B", &["X", "D"], 1),
            act("C", &["B"], 1),
            act("D", &["C"], 1),
        ]);
        let Violation::Cycle { from, to } = &report.violations[0] else {
            panic!("{report:?}")
        };
        let on_cycle = [("B", "C"), ("C", "D"), ("D", "B")];
        assert!(on_cycle.contains(&(from.as_str(), to.as_str())), "{from}->{to}");
    }

    #[test]
    fn triangular_order_violation() {
        let mut a = act("A", &[], 3);
        a.distribution = DurationDistribution::Triangular {
            optimistic: 5.0,
            most_likely: 3.0,
            pessimistic: 8.0,
        };
        let report = validate(&[a]);
        assert!(matches!(
            &report.violations[..],
            [Violation::Distribution { activity, reason }] if activity == "A" && reason.contains("out of order")
        ));
    }

    #[test]
    fn other_violations_reported_per_activity() {
        let mut z = act("Z", &["Z", "nope"], 0);
        z.cost_per_period = Some(-1.0);
        z.distribution = DurationDistribution::Discrete {
            atoms: vec![(1.0, 0.5), (2.0, 0.4)],
        };
        let report = validate(&[z, act("Y", &[], 1), act("Y", &[], 1)]);
        let text = report.to_string();
        for needle in ["itself", "unknown predecessor 'nope'", "at least 1", "sum to", "non-negative", "duplicate activity id 'Y'"] {
            assert!(text.contains(needle), "missing {needle} in {text}");
        }
        assert!(validate(&[]).violations == vec![Violation::Empty]);
        let u = DurationDistribution::Uniform { lo: 3.0, hi: 3.0 };
        assert!(u.check().is_err());
        assert!(DurationDistribution::Normal { mean: 3.0, sd: 0.0 }.check().is_err());
    }

    #[test]
    fn levels() {
        let c = chain(&[1, 1, 1, 1, 1]);
        let l = c.progressive_levels();
        assert_eq!(l.per_activity, vec![1, 2, 3, 4, 5]);
        assert_eq!(l.depth, 5);

        let par = ProjectNetwork::new(
            "par",
            (0..5).map(|i| act(&format!("P{i}"), &[], 2)).collect(),
        )
        .unwrap();
        assert_eq!(par.progressive_levels().per_activity, vec![1; 5]);
        assert_eq!(par.progressive_levels().depth, 1);

        // Chains A-B-D and A-C-D both have three activities.
        assert_eq!(diamond([1, 1, 1, 1]).progressive_levels().depth, 3);
    }

    #[test]
    fn sp_indicator() {
        assert!((serial_parallel_indicator(9, 13).unwrap() - 0.666).abs() < 1e-3);
        assert!((serial_parallel_indicator(17, 40).unwrap() - 0.410).abs() < 1e-3);
        assert_eq!(serial_parallel_indicator(7, 7).unwrap(), 1.0);
        assert_eq!(serial_parallel_indicator(1, 7).unwrap(), 0.0);
        assert_eq!(serial_parallel_indicator(1, 1), Err(NetworkError::SingleActivity));
        assert!(serial_parallel_indicator(8, 7).is_err());
    }

    #[test]
    fn forward_pass_examples() {
        let s = chain(&[1, 1, 1]).forward_pass(&[2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.finish, vec![2.0, 5.0, 9.0]);
        assert_eq!(s.project_duration, 9.0);

        let d = diamond([1, 1, 1, 1]).forward_pass(&[2.0, 3.0, 5.0, 1.0]).unwrap();
        assert_eq!(d.project_duration, 8.0);
        assert_eq!(d.start[3], 7.0);

        assert_eq!(chain(&[7]).forward_pass(&[7.0]).unwrap().project_duration, 7.0);
        assert!(matches!(
            chain(&[1, 1]).forward_pass(&[1.0]),
            Err(NetworkError::DurationCount { expected: 2, got: 1 })
        ));
        assert!(chain(&[1]).forward_pass(&[0.0]).is_err());
    }

    #[test]
    fn baseline_examples() {
        assert_eq!(chain(&[2, 3]).bpd(), 5.0);
        let par = ProjectNetwork::new("p", vec![act("A", &[], 4), act("B", &[], 6)]).unwrap();
        assert_eq!(par.bpd(), 6.0);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = chain(&[2, 3]);
        let b = chain(&[2, 4]);
        assert_eq!(a.fingerprint(), chain(&[2, 3]).fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    /// Random DAG: activity i may depend on any j < i.
    fn arb_dag() -> impl Strategy<Value = (ProjectNetwork, Vec<f64>)> {
        (1usize..=10).prop_flat_map(|n| {
            let edges = proptest::collection::vec(proptest::bool::weighted(0.3), n * n);
            let pds = proptest::collection::vec(1u32..12, n);
            let durs = proptest::collection::vec(0.1f64..20.0, n);
            (Just(n), edges, pds, durs).prop_map(|(n, edges, pds, durs)| {
                let acts = (0..n)
                    .map(|i| {
                        let preds: Vec<String> = (0..i)
                            .filter(|&j| edges[i * n + j])
                            .map(|j| format!("T{j}"))
                            .collect();
                        let mut a = act(&format!("T{i}"), &[], pds[i]);
                        a.predecessors = preds;
                        a
                    })
                    .collect();
                (ProjectNetwork::new("dag", acts).unwrap(), durs)
            })
        })
    }

    /// Longest path by enumerating every chain that starts at a source.
    fn brute_force_longest(net: &ProjectNetwork, durs: &[f64]) -> f64 {
        let n = net.len();
        let mut succs = vec![Vec::new(); n];
        for i in 0..n {
            for &p in net.predecessors(i) {
                succs[p].push(i);
            }
        }
        fn walk(i: usize, acc: f64, succs: &[Vec<usize>], durs: &[f64], best: &mut f64) {
            let total = acc + durs[i];
            if succs[i].is_empty() {
                *best = best.max(total);
            }
            for &s in &succs[i] {
                walk(s, total, succs, durs, best);
            }
        }
        let mut best = 0.0;
        for i in (0..n).filter(|&i| net.predecessors(i).is_empty()) {
            walk(i, 0.0, &succs, durs, &mut best);
        }
        best
    }

    proptest! {
        #[test]
        fn forward_pass_respects_precedence((net, durs) in arb_dag()) {
            let s = net.forward_pass(&durs).unwrap();
            for i in 0..net.len() {
                prop_assert!(s.start[i] >= 0.0);
                for &p in net.predecessors(i) {
                    prop_assert!(s.start[i] >= s.finish[p]);
                }
            }
            let longest = brute_force_longest(&net, &durs);
            prop_assert!((s.project_duration - longest).abs() < 1e-9);
            let planned = net.planned_durations();
            prop_assert_eq!(net.bpd(), brute_force_longest(&net, &planned));
        }

        #[test]
        fn sp_indicator_bounds((net, _d) in arb_dag()) {
            let n_t = net.activity_count();
            let n_s = net.progressive_levels().depth;
            prop_assert!(n_s <= n_t);
            if n_t >= 2 {
                let sp = net.serial_parallel().unwrap();
                prop_assert!((0.0..=1.0).contains(&sp));
                prop_assert_eq!(sp == 1.0, n_s == n_t);
            }
        }

        #[test]
        fn extending_the_deepest_chain_never_lowers_depth((net, _d) in arb_dag()) {
            let levels = net.progressive_levels();
            let deepest = levels.per_activity.iter().position(|&l| l == levels.depth).unwrap();
            let mut acts = net.activities().to_vec();
            let mut extra = act("EXTRA", &[], 1);
            extra.predecessors = vec![acts[deepest].id.clone()];
            acts.push(extra);
            let bigger = ProjectNetwork::new("x", acts).unwrap();
            prop_assert!(bigger.progressive_levels().depth >= levels.depth);
        }

        #[test]
        fn serial_chain_bpd_equals_total(pds in proptest::collection::vec(1u32..30, 1..12)) {
            let c = chain(&pds);
            prop_assert_eq!(c.bpd(), c.total_planned_duration());
        }
    }
}
