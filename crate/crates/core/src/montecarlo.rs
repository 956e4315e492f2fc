//! Monte Carlo execution of a project network.
//!
//! Every run draws its activity durations from a ChaCha8 stream selected by
//! `(master_seed, run_id)`, so a store is reproducible bit for bit whatever
//! the number of worker threads.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::curves::{realized_values, weights, CumulativeCurve, CurveError, ValueMeasure};
use crate::network::{DurationDistribution, ProjectNetwork, MIN_NORMAL_DURATION};

/// Identifier of the per-run random stream construction, echoed in stores.
pub const GENERATOR_ID: &str = "chacha8-stream-per-run/v1";

pub const DEFAULT_RUNS: usize = 25_000;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("n_runs must be at least 1")]
    NoRuns,
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("store fingerprint {found} does not match project fingerprint {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("malformed store: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Inverse-CDF draw from `dist` for a uniform variate `u` in `[0, 1)`.
pub fn sample_duration(dist: &DurationDistribution, u: f64) -> f64 {
    match *dist {
        DurationDistribution::Triangular {
            optimistic: a,
            most_likely: m,
            pessimistic: b,
        } => {
            if a == b {
                return a;
            }
            let range = b - a;
            if u < (m - a) / range {
                a + (u * range * (m - a)).sqrt()
            } else {
                b - ((1.0 - u) * range * (b - m)).sqrt()
            }
        }
        DurationDistribution::Uniform { lo, hi } => lo + u * (hi - lo),
        DurationDistribution::Normal { mean, sd } => {
            // Inverse CDF restricted to the part of the normal above the
            // truncation point; equal in law to rejecting draws below it.
            let normal = Normal::new(mean, sd).expect("validated normal parameters");
            let floor = normal.cdf(MIN_NORMAL_DURATION);
            let p = (floor + u * (1.0 - floor)).min(1.0 - f64::EPSILON);
            let x = normal.inverse_cdf(p);
            if x.is_finite() {
                x.max(MIN_NORMAL_DURATION)
            } else {
                MIN_NORMAL_DURATION
            }
        }
        DurationDistribution::Discrete { ref atoms } => {
            let mut acc = 0.0;
            for &(value, p) in atoms {
                acc += p;
                if u < acc {
                    return value;
                }
            }
            atoms
                .iter()
                .rev()
                .find(|a| a.1 > 0.0)
                .map(|a| a.0)
                .unwrap_or(atoms[atoms.len() - 1].0)
        }
    }
}

/// Random stream of run `run_id`.
pub fn run_rng(master_seed: u64, run_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_id);
    rng
}

/// Sampled activity durations of run `run_id`, in network order.
pub fn realization(network: &ProjectNetwork, master_seed: u64, run_id: u64) -> Vec<f64> {
    let mut rng = run_rng(master_seed, run_id);
    network
        .activities()
        .iter()
        .map(|a| sample_duration(&a.distribution, rng.random::<f64>()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n_runs: usize,
    pub master_seed: u64,
    pub value_measure: ValueMeasure,
    pub store_trajectories: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_runs: DEFAULT_RUNS,
            master_seed: 0,
            value_measure: ValueMeasure::WorkPeriods,
            store_trajectories: true,
        }
    }
}

/// Delay / overwork classification of a finished execution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub delay_flag: bool,
    pub overwork_flag: bool,
    pub delay_amount: f64,
    pub overwork_amount: f64,
}

/// Flags are set only for strict excess; finishing exactly on plan is not late.
pub fn classify_outcome(afd: f64, tad_final: f64, bpd: f64, tpd_final: f64) -> Outcome {
    Outcome {
        delay_flag: afd > bpd,
        overwork_flag: tad_final > tpd_final,
        delay_amount: afd - bpd,
        overwork_amount: tad_final - tpd_final,
    }
}

/// One simulated execution. `earned` / `actual` are the per-period curves
/// in the store's value measure (empty when trajectories are not kept).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub run_id: u64,
    pub afd: f64,
    pub tad_final: f64,
    pub outcome: Outcome,
    pub earned: Vec<f64>,
    pub actual: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn has_trajectory(&self) -> bool {
        !self.earned.is_empty()
    }

    pub fn earned_curve(&self, measure: ValueMeasure) -> CumulativeCurve {
        CumulativeCurve::from_raw(measure, self.earned.clone())
    }

    pub fn actual_curve(&self, measure: ValueMeasure) -> CumulativeCurve {
        CumulativeCurve::from_raw(measure, self.actual.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationStore {
    pub config: RunConfig,
    pub fingerprint: String,
    pub generator: String,
    pub bpd: f64,
    pub tpd_final: f64,
    pub records: Vec<TrajectoryRecord>,
}

impl SimulationStore {
    pub fn measure(&self) -> ValueMeasure {
        self.config.value_measure
    }

    pub fn has_trajectories(&self) -> bool {
        self.config.store_trajectories
    }

    pub fn delay_rate(&self) -> f64 {
        let late = self.records.iter().filter(|r| r.outcome.delay_flag).count();
        late as f64 / self.records.len() as f64
    }

    pub fn mean_afd(&self) -> f64 {
        self.records.iter().map(|r| r.afd).sum::<f64>() / self.records.len() as f64
    }

    pub fn check_fingerprint(&self, network: &ProjectNetwork) -> Result<(), SimulationError> {
        let expected = network.fingerprint();
        if expected != self.fingerprint {
            return Err(SimulationError::FingerprintMismatch {
                expected,
                found: self.fingerprint.clone(),
            });
        }
        Ok(())
    }
}

/// Simulates `config.n_runs` executions of `network`.
pub fn run_simulation(
    network: &ProjectNetwork,
    config: &RunConfig,
) -> Result<SimulationStore, SimulationError> {
    if config.n_runs == 0 {
        return Err(SimulationError::NoRuns);
    }
    let w = weights(network, config.value_measure)?;
    let bpd = network.bpd();
    let tpd_final = network.total_planned_duration();

    let records = (0..config.n_runs as u64)
        .into_par_iter()
        .map(|run_id| {
            let durations = realization(network, config.master_seed, run_id);
            let schedule = network.forward_pass_unchecked(&durations);
            let afd = schedule.project_duration;
            let tad_final: f64 = durations.iter().sum();
            let (earned, actual) = if config.store_trajectories {
                realized_values(network, &w, &durations, &schedule)
            } else {
                (Vec::new(), Vec::new())
            };
            TrajectoryRecord {
                run_id,
                afd,
                tad_final,
                outcome: classify_outcome(afd, tad_final, bpd, tpd_final),
                earned,
                actual,
            }
        })
        .collect();

    Ok(SimulationStore {
        config: config.clone(),
        fingerprint: network.fingerprint(),
        generator: GENERATOR_ID.to_string(),
        bpd,
        tpd_final,
        records,
    })
}

const STORE_MAGIC: &str = "# sedm simulation store v1";
const FINALS_HEADER: [&str; 7] = [
    "run_id",
    "afd",
    "tad_final",
    "delay_flag",
    "overwork_flag",
    "delay_amount",
    "overwork_amount",
];
const TRAJECTORY_HEADER: [&str; 4] = ["run_id", "period", "ted", "tad"];

/// Serializes a store: `# key=value` header lines, then a `[finals]` table
/// and, when trajectories are kept, a long-form `[trajectories]` table.
pub fn write_store<W: Write>(store: &SimulationStore, out: W) -> Result<(), SimulationError> {
    let mut out = out;
    let c = &store.config;
    writeln!(out, "{STORE_MAGIC}")?;
    writeln!(out, "# n_runs={}", c.n_runs)?;
    writeln!(out, "# master_seed={}", c.master_seed)?;
    writeln!(out, "# value_measure={}", c.value_measure)?;
    writeln!(out, "# store_trajectories={}", c.store_trajectories)?;
    writeln!(out, "# fingerprint={}", store.fingerprint)?;
    writeln!(out, "# generator={}", store.generator)?;
    writeln!(out, "# bpd={}", store.bpd)?;
    writeln!(out, "# tpd_final={}", store.tpd_final)?;
    writeln!(out, "[finals]")?;
    writeln!(out, "{}", FINALS_HEADER.join(","))?;
    for r in &store.records {
        let o = &r.outcome;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.run_id,
            r.afd,
            r.tad_final,
            u8::from(o.delay_flag),
            u8::from(o.overwork_flag),
            o.delay_amount,
            o.overwork_amount
        )?;
    }
    if c.store_trajectories {
        writeln!(out, "[trajectories]")?;
        writeln!(out, "{}", TRAJECTORY_HEADER.join(","))?;
        for r in &store.records {
            for (p, (e, a)) in r.earned.iter().zip(&r.actual).enumerate() {
                writeln!(out, "{},{},{},{}", r.run_id, p, e, a)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_store(store: &SimulationStore, path: &Path) -> Result<(), SimulationError> {
    write_store(store, BufWriter::new(File::create(path)?))
}

/// Loads a store, checking it against `network` when one is given.
pub fn load_store(
    path: &Path,
    network: Option<&ProjectNetwork>,
) -> Result<SimulationStore, SimulationError> {
    let store = read_store(BufReader::new(File::open(path)?))?;
    if let Some(net) = network {
        store.check_fingerprint(net)?;
    }
    Ok(store)
}

fn bad(msg: impl Into<String>) -> SimulationError {
    SimulationError::Format(msg.into())
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, SimulationError> {
    s.trim()
        .parse()
        .map_err(|_| bad(format!("cannot parse {what} from '{s}'")))
}

pub fn read_store<R: BufRead>(input: R) -> Result<SimulationStore, SimulationError> {
    let mut lines = input.lines();
    let mut next = || -> Result<Option<String>, SimulationError> {
        lines.next().transpose().map_err(SimulationError::from)
    };

    if next()?.as_deref() != Some(STORE_MAGIC) {
        return Err(bad("missing store header line"));
    }
    let mut header = std::collections::HashMap::new();
    let mut line = next()?;
    while let Some(l) = line.as_deref() {
        let Some(kv) = l.strip_prefix("# ") else { break };
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| bad(format!("bad header line '{l}'")))?;
        header.insert(k.to_string(), v.to_string());
        line = next()?;
    }
    let get = |k: &str| {
        header
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| bad(format!("header lacks '{k}'")))
    };
    let config = RunConfig {
        n_runs: parse(get("n_runs")?, "n_runs")?,
        master_seed: parse(get("master_seed")?, "master_seed")?,
        value_measure: get("value_measure")?.parse().map_err(bad)?,
        store_trajectories: parse(get("store_trajectories")?, "store_trajectories")?,
    };
    if config.n_runs == 0 {
        return Err(SimulationError::NoRuns);
    }
    let fingerprint = get("fingerprint")?.to_string();
    let generator = get("generator")?.to_string();
    let bpd: f64 = parse(get("bpd")?, "bpd")?;
    let tpd_final: f64 = parse(get("tpd_final")?, "tpd_final")?;

    if line.as_deref() != Some("[finals]") {
        return Err(bad("expected [finals] section"));
    }
    if next()?.as_deref() != Some(FINALS_HEADER.join(",").as_str()) {
        return Err(bad("unexpected finals columns"));
    }
    let flag = |s: &str| match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(bad(format!("bad flag '{s}'"))),
    };
    let mut records = Vec::with_capacity(config.n_runs);
    loop {
        line = next()?;
        let Some(l) = line.as_deref() else { break };
        if l.starts_with('[') {
            break;
        }
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != FINALS_HEADER.len() {
            return Err(bad(format!("finals row has {} fields: '{l}'", f.len())));
        }
        records.push(TrajectoryRecord {
            run_id: parse(f[0], "run_id")?,
            afd: parse(f[1], "afd")?,
            tad_final: parse(f[2], "tad_final")?,
            outcome: Outcome {
                delay_flag: flag(f[3])?,
                overwork_flag: flag(f[4])?,
                delay_amount: parse(f[5], "delay_amount")?,
                overwork_amount: parse(f[6], "overwork_amount")?,
            },
            earned: Vec::new(),
            actual: Vec::new(),
        });
    }
    if records.len() != config.n_runs {
        return Err(bad(format!(
            "header declares {} runs, finals hold {}",
            config.n_runs,
            records.len()
        )));
    }
    if records.iter().enumerate().any(|(i, r)| r.run_id != i as u64) {
        return Err(bad("finals rows must list run ids 0..n_runs in order"));
    }

    match (config.store_trajectories, line.as_deref()) {
        (false, None) => {}
        (true, Some("[trajectories]")) => {
            if next()?.as_deref() != Some(TRAJECTORY_HEADER.join(",").as_str()) {
                return Err(bad("unexpected trajectory columns"));
            }
            while let Some(l) = next()? {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != TRAJECTORY_HEADER.len() {
                    return Err(bad(format!("trajectory row has {} fields: '{l}'", f.len())));
                }
                let run: usize = parse(f[0], "run_id")?;
                let period: usize = parse(f[1], "period")?;
                let rec = records
                    .get_mut(run)
                    .ok_or_else(|| bad(format!("trajectory for unknown run {run}")))?;
                if period != rec.earned.len() {
                    return Err(bad(format!("run {run}: period {period} out of sequence")));
                }
                rec.earned.push(parse(f[2], "ted")?);
                rec.actual.push(parse(f[3], "tad")?);
            }
            if let Some(r) = records.iter().find(|r| r.earned.is_empty()) {
                return Err(bad(format!("run {} has no trajectory", r.run_id)));
            }
        }
        (want, got) => {
            return Err(bad(format!(
                "store_trajectories={want} but found section {got:?}"
            )))
        }
    }

    Ok(SimulationStore {
        config,
        fingerprint,
        generator,
        bpd,
        tpd_final,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::{act, chain};
    use crate::network::Activity;

    fn tri(a: f64, m: f64, b: f64) -> DurationDistribution {
        DurationDistribution::Triangular {
            optimistic: a,
            most_likely: m,
            pessimistic: b,
        }
    }

    #[test]
    fn triangular_inverse_cdf() {
        assert_eq!(sample_duration(&tri(2.0, 4.0, 6.0), 0.5), 4.0);
        assert!((sample_duration(&tri(1.0, 2.0, 4.0), 1.0 / 3.0) - 2.0).abs() < 1e-12);
        let expected = 4.0 - (0.5f64 * 3.0 * 2.0).sqrt();
        assert!((sample_duration(&tri(1.0, 2.0, 4.0), 0.5) - expected).abs() < 1e-12);
        assert!((expected - 2.267949).abs() < 1e-6);
        assert_eq!(sample_duration(&tri(3.0, 3.0, 3.0), 0.77), 3.0);
    }

    #[test]
    fn other_distributions() {
        let u = DurationDistribution::Uniform { lo: 2.0, hi: 6.0 };
        assert_eq!(sample_duration(&u, 0.25), 3.0);
        let d = DurationDistribution::Discrete {
            atoms: vec![(1.0, 0.2), (5.0, 0.0), (7.0, 0.8)],
        };
        assert_eq!(sample_duration(&d, 0.1), 1.0);
        assert_eq!(sample_duration(&d, 0.2), 7.0);
        assert_eq!(sample_duration(&d, 0.999_999), 7.0);
        let n = DurationDistribution::Normal { mean: 10.0, sd: 2.0 };
        assert!((sample_duration(&n, 0.5) - 10.0).abs() < 1e-5);
        // Heavily truncated: every draw stays above the floor.
        let low = DurationDistribution::Normal { mean: -5.0, sd: 1.0 };
        for k in 0..100 {
            let x = sample_duration(&low, k as f64 / 100.0);
            assert!(x >= MIN_NORMAL_DURATION && x.is_finite());
        }
    }

    #[test]
    fn triangular_sampling_soundness() {
        let dist = tri(2.0, 3.0, 7.0);
        let n = 1_000_000u64;
        let mut rng = run_rng(99, 0);
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_duration(&dist, rng.random::<f64>());
            assert!((2.0..=7.0).contains(&x));
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!((mean - 4.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn classify_examples() {
        let o = classify_outcome(125.135, 141.748, 126.0, 141.0);
        assert!(!o.delay_flag && o.overwork_flag);
        assert!((o.delay_amount + 0.865).abs() < 1e-9);
        assert!((o.overwork_amount - 0.748).abs() < 1e-9);
        let o = classify_outcome(132.052, 148.910, 126.0, 141.0);
        assert!(o.delay_flag && o.overwork_flag);
        assert!((o.delay_amount - 6.052).abs() < 1e-9);
        assert!((o.overwork_amount - 7.910).abs() < 1e-9);
        let o = classify_outcome(126.0, 141.0, 126.0, 141.0);
        assert_eq!(
            o,
            Outcome {
                delay_flag: false,
                overwork_flag: false,
                delay_amount: 0.0,
                overwork_amount: 0.0
            }
        );
    }

    #[test]
    fn degenerate_run_collapses_to_plan() {
        let net = chain(&[3, 5, 2]);
        let store = run_simulation(
            &net,
            &RunConfig {
                n_runs: 1,
                ..RunConfig::default()
            },
        )
        .unwrap();
        let r = &store.records[0];
        assert_eq!(r.afd, store.bpd);
        assert!(!r.outcome.delay_flag);
        assert_eq!(r.outcome.delay_amount, 0.0);
        assert_eq!(r.earned.last(), Some(&10.0));
    }

    #[test]
    fn zero_runs_rejected() {
        let net = chain(&[3]);
        let cfg = RunConfig {
            n_runs: 0,
            ..RunConfig::default()
        };
        assert!(matches!(run_simulation(&net, &cfg), Err(SimulationError::NoRuns)));
        let text = "# sedm simulation store v1\n# n_runs=0\n# master_seed=0\n# value_measure=cost\n# store_trajectories=false\n# fingerprint=x\n# generator=g\n# bpd=1\n# tpd_final=1\n[finals]\n";
        assert!(matches!(read_store(text.as_bytes()), Err(SimulationError::NoRuns)));
    }

    fn triangular_network() -> ProjectNetwork {
        let mk = |id: &str, preds: &[&str], pd: u32| -> Activity {
            let mut a = act(id, preds, pd);
            let p = f64::from(pd);
            a.distribution = tri(0.8 * p, p, 1.5 * p);
            a.cost_per_period = Some(10.0 * p);
            a
        };
        ProjectNetwork::new(
            "tri",
            vec![mk("A", &[], 4), mk("B", &["A"], 6), mk("C", &["A"], 3), mk("D", &["B", "C"], 5)],
        )
        .unwrap()
    }

    #[test]
    fn terminal_identity_and_shapes() {
        let net = triangular_network();
        for measure in [ValueMeasure::WorkPeriods, ValueMeasure::Cost] {
            let cfg = RunConfig {
                n_runs: 500,
                master_seed: 7,
                value_measure: measure,
                store_trajectories: true,
            };
            let store = run_simulation(&net, &cfg).unwrap();
            let target = match measure {
                ValueMeasure::WorkPeriods => net.total_planned_duration(),
                ValueMeasure::Cost => net.budget_at_completion().unwrap(),
            };
            for r in &store.records {
                assert!((r.earned.last().unwrap() - target).abs() < 1e-9);
                assert_eq!(r.earned.len(), r.afd.ceil() as usize + 1);
                assert_eq!(r.outcome.delay_flag, r.afd > store.bpd);
            }
        }
    }

    #[test]
    fn store_round_trip_and_fingerprint() {
        let net = triangular_network();
        let cfg = RunConfig {
            n_runs: 50,
            master_seed: 3,
            ..RunConfig::default()
        };
        let store = run_simulation(&net, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        save_store(&store, &path).unwrap();
        let back = load_store(&path, Some(&net)).unwrap();
        assert_eq!(back, store);

        let other = chain(&[4, 6]);
        assert!(matches!(
            load_store(&path, Some(&other)),
            Err(SimulationError::FingerprintMismatch { .. })
        ));

        let lean = run_simulation(&net, &RunConfig { store_trajectories: false, ..cfg }).unwrap();
        let mut buf = Vec::new();
        write_store(&lean, &mut buf).unwrap();
        assert_eq!(read_store(&buf[..]).unwrap(), lean);
        assert!(read_store(&b"garbage"[..]).is_err());
    }

    #[test]
    fn same_seed_same_bytes() {
        let net = triangular_network();
        let cfg = RunConfig {
            n_runs: 200,
            master_seed: 11,
            ..RunConfig::default()
        };
        let bytes = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let store = pool.install(|| run_simulation(&net, &cfg).unwrap());
            let mut buf = Vec::new();
            write_store(&store, &mut buf).unwrap();
            buf
        };
        assert_eq!(bytes(1), bytes(4));
        let other = run_simulation(&net, &RunConfig { master_seed: 12, ..cfg.clone() }).unwrap();
        let mut buf = Vec::new();
        write_store(&other, &mut buf).unwrap();
        assert_ne!(buf, bytes(1));
    }
}
