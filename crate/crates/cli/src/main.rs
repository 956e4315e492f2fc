//! `sedm`: plan, simulate, control and benchmark project schedules.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod svg;

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sedm_core::bench::{esm_at, run_benchmark, stochastic_forecast, ForecastError, MapeReport, Method, ModelSummary, Stores};
use sedm_core::curves::{planned_curve, ControlSnapshot, TrackingLog, ValueMeasure};
use sedm_core::files::{load_project, load_tracking};
use sedm_core::milestone::{KdeModel, MilestoneError};
use sedm_core::montecarlo::{load_store, run_simulation, save_store, RunConfig, SimulationError, SimulationStore};
use sedm_core::network::ProjectNetwork;
use sedm_core::statlearn::CvReport;
use sedm_core::stats::{quantile_sorted, sorted};

use config::Config;
use svg::Series;

#[derive(Parser)]
#[command(name = "sedm", version, about = "Stochastic earned duration forecasting for project schedules")]
struct Cli {
    /// TOML file with default settings (runs, seed, folds, grids, ...).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Baseline schedule, BPD, serial/parallel indicator and planned curve.
    Plan {
        project: PathBuf,
        /// Directory for schedule.csv, tpd.csv and tpd.svg.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Monte Carlo simulation of the project; writes a store file.
    Simulate {
        project: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// `work-periods` (for SEDM) or `cost` (for SEVM).
        #[arg(long, default_value = "work-periods")]
        measure: ValueMeasure,
        #[arg(long)]
        out: PathBuf,
    },
    /// Milestone report at control period AD.
    Control {
        project: PathBuf,
        tracking: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        at: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the matched point cloud as CSV.
        #[arg(long)]
        cloud_out: Option<PathBuf>,
        /// Write the fitted density on a 100 x 100 grid as CSV.
        #[arg(long)]
        grid_out: Option<PathBuf>,
        /// Directory for the cross-validation tables.
        #[arg(long)]
        cv_out: Option<PathBuf>,
    },
    /// Forecast at every control period and score each method by MAPE.
    Benchmark {
        project: PathBuf,
        tracking: PathBuf,
        /// Realized duration; defaults to the tracked completion period.
        #[arg(long)]
        rd: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "ESM,SEVM,SEDM")]
        methods: Vec<Method>,
        /// Simulation store; give one per value measure the methods need.
        #[arg(long)]
        store: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Percent-of-BPD report rows, e.g. `0,25,50,75,100`.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<u32>>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Failures split by exit status: bad input is 2, anything else 1.
#[derive(Debug)]
enum Failure {
    Input(String),
    Runtime(String),
}

impl Failure {
    fn input(e: impl Display) -> Failure {
        Failure::Input(e.to_string())
    }

    fn runtime(e: impl Display) -> Failure {
        Failure::Runtime(e.to_string())
    }

    fn writing(path: &Path, e: impl Display) -> Failure {
        Failure::Runtime(format!("{}: {e}", path.display()))
    }
}

fn store_failure(path: &Path, e: SimulationError) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn forecast_failure(e: ForecastError) -> Failure {
    match e {
        ForecastError::MeasureMismatch { .. }
        | ForecastError::MissingStore(..)
        | ForecastError::NonPositiveRd(_)
        | ForecastError::Incomplete(_)
        | ForecastError::Simulation(SimulationError::FingerprintMismatch { .. })
        | ForecastError::Milestone(MilestoneError::NoTrajectories) => Failure::input(e),
        other => Failure::runtime(other),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::writing(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Failure::writing(path, e))
}

/// Opens `path` with a `# ...` provenance line ahead of the CSV header.
fn create_csv(path: &Path, banner: &str) -> Result<BufWriter<File>, Failure> {
    let mut out = create(path)?;
    writeln!(out, "# {banner}").map_err(|e| Failure::writing(path, e))?;
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Failure::writing(path, e))
}

fn project(path: &Path) -> Result<ProjectNetwork, Failure> {
    Ok(load_project(path).map_err(Failure::input)?.network)
}

fn tracking(path: &Path, network: &ProjectNetwork) -> Result<TrackingLog, Failure> {
    load_tracking(path, network).map_err(Failure::input)
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Config::default_or(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Plan { project, out_dir } => plan(&project, out_dir.as_deref()),
        Command::Simulate {
            project,
            runs,
            seed,
            measure,
            out,
        } => simulate(&cfg, &project, runs, seed, measure, &out),
        Command::Control {
            project,
            tracking,
            store,
            at,
            seed,
            cloud_out,
            grid_out,
            cv_out,
        } => control(
            &cfg,
            &project,
            &tracking,
            &store,
            at,
            seed,
            ControlOutputs {
                cloud: cloud_out,
                grid: grid_out,
                cv: cv_out,
            },
        ),
        Command::Benchmark {
            project,
            tracking,
            rd,
            methods,
            store,
            seed,
            checkpoints,
            out_dir,
        } => benchmark(&cfg, &project, &tracking, rd, &methods, &store, seed, checkpoints, &out_dir),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

impl Config {
    fn default_or(path: Option<&Path>) -> Result<Config, Failure> {
        path.map_or(Ok(Config::default()), |p| Config::load(p).map_err(Failure::Input))
    }
}

fn plan(path: &Path, out_dir: Option<&Path>) -> Result<(), Failure> {
    let net = project(path)?;
    let baseline = net.baseline_schedule();
    let levels = net.progressive_levels();
    let sp = net.serial_parallel().map_err(Failure::input)?;
    let curve = planned_curve(&net, &baseline, ValueMeasure::WorkPeriods).map_err(Failure::runtime)?;

    println!("project: {}", net.name());
    println!("activities: {}", net.activity_count());
    println!("BPD: {}", baseline.project_duration);
    println!("TPD_final: {}", curve.final_value());
    // Three decimals, truncated, as SP is usually tabulated.
    println!(
        "SP: {:.3} (n_s = {}, n_t = {}, exact {sp:.6})",
        (sp * 1000.0).floor() / 1000.0,
        levels.depth,
        net.activity_count()
    );
    if let Some(bac) = net.budget_at_completion() {
        println!("BAC: {bac}");
    }
    println!();
    println!("{:<8} {:<28} {:>5} {:>4} {:>7} {:>7}", "id", "name", "level", "pd", "start", "finish");
    for (i, a) in net.activities().iter().enumerate() {
        println!(
            "{:<8} {:<28} {:>5} {:>4} {:>7} {:>7}",
            a.id, a.name, levels.per_activity[i], a.planned_duration, baseline.start[i], baseline.finish[i]
        );
    }

    if let Some(dir) = out_dir {
        let sched_path = dir.join("schedule.csv");
        let mut out = create(&sched_path)?;
        let mut rows = String::from("id,name,level,pd,start,finish,cost_per_period\n");
        for (i, a) in net.activities().iter().enumerate() {
            rows.push_str(&format!(
                "{},\"{}\",{},{},{},{},{}\n",
                a.id,
                a.name.replace('"', "\"\""),
                levels.per_activity[i],
                a.planned_duration,
                baseline.start[i],
                baseline.finish[i],
                a.cost_per_period.map(|c| c.to_string()).unwrap_or_default()
            ));
        }
        out.write_all(rows.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Failure::writing(&sched_path, e))?;

        let tpd_path = dir.join("tpd.csv");
        curve.write_csv(create(&tpd_path)?).map_err(|e| Failure::writing(&tpd_path, e))?;
        let series = Series {
            name: "TPD".into(),
            points: curve.values().iter().enumerate().map(|(t, &v)| (t as f64, v)).collect(),
        };
        let svg = svg::line_chart(
            &format!("{}: planned cumulative duration", net.name()),
            &format!("BPD {} TPD_final {}", baseline.project_duration, curve.final_value()),
            "period",
            "TPD",
            &[series],
            None,
        );
        write_text(&dir.join("tpd.svg"), &svg)?;
        println!("\nwrote schedule.csv, tpd.csv and tpd.svg to {}", dir.display());
    }
    Ok(())
}

fn simulate(
    cfg: &Config,
    path: &Path,
    runs: Option<usize>,
    seed: Option<u64>,
    measure: ValueMeasure,
    out: &Path,
) -> Result<(), Failure> {
    let net = project(path)?;
    let config = RunConfig {
        n_runs: runs.unwrap_or(cfg.runs()),
        master_seed: seed.unwrap_or(cfg.seed()),
        value_measure: measure,
        store_trajectories: true,
    };
    let store = run_simulation(&net, &config).map_err(Failure::input)?;
    save_store(&store, out).map_err(|e| Failure::writing(out, e))?;

    let afd = sorted(&store.records.iter().map(|r| r.afd).collect::<Vec<_>>());
    let overwork = store.records.iter().filter(|r| r.outcome.overwork_flag).count() as f64 / afd.len() as f64;
    println!("project: {}", net.name());
    println!("runs: {}", config.n_runs);
    println!("seed: {}", config.master_seed);
    println!("measure: {measure}");
    println!("BPD: {}", store.bpd);
    println!("TPD_final: {}", store.tpd_final);
    println!("P(delay): {:.4} ({})", store.delay_rate(), pct(store.delay_rate()));
    println!("P(overwork): {overwork:.4}");
    println!("mean AFD: {:.3}", store.mean_afd());
    let q: Vec<String> = [0.05, 0.25, 0.5, 0.75, 0.95]
        .iter()
        .map(|&p| format!("{:.0}%={:.3}", p * 100.0, quantile_sorted(&afd, p)))
        .collect();
    println!("AFD quantiles: {}", q.join(" "));
    println!("store: {}", out.display());
    Ok(())
}

struct ControlOutputs {
    cloud: Option<PathBuf>,
    grid: Option<PathBuf>,
    cv: Option<PathBuf>,
}

fn print_cv(title: &str, summary: &ModelSummary) {
    let r: &CvReport = &summary.report;
    let p = r.plan;
    println!(
        "\n{title}: {}-fold CV x{}{}, seed {}",
        p.folds,
        p.repeats,
        if p.stratified { ", stratified" } else { "" },
        p.seed
    );
    println!(
        "{:<34} {:<9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>4}",
        "algorithm", "metric", "Min", "1st Qu", "Median", "Mean", "3rd Qu", "Max", "NA"
    );
    for e in &r.entries {
        for m in &e.metrics {
            let s = m.summary;
            println!(
                "{:<34} {:<9} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>4}",
                e.candidate.to_string(),
                m.metric.as_str(),
                s.min,
                s.q1,
                s.median,
                s.mean,
                s.q3,
                s.max,
                s.missing
            );
        }
    }
    let held: Vec<String> = summary
        .test_scores
        .iter()
        .map(|(m, v)| format!("{} {v:.4}", m.as_str()))
        .collect();
    println!("selected: {}", summary.chosen);
    if !held.is_empty() {
        println!("held-out: {}", held.join(", "));
    }
}

#[allow(clippy::too_many_arguments)]
fn control(
    cfg: &Config,
    project_path: &Path,
    tracking_path: &Path,
    store_path: &Path,
    at: usize,
    seed: Option<u64>,
    outputs: ControlOutputs,
) -> Result<(), Failure> {
    let net = project(project_path)?;
    let log = tracking(tracking_path, &net)?;
    let store = load_store(store_path, Some(&net)).map_err(|e| store_failure(store_path, e))?;
    if at > log.periods() {
        return Err(Failure::Input(format!(
            "control period {at} is outside the tracked range 0..={}",
            log.periods()
        )));
    }
    let measure = store.measure();
    let seed = seed.unwrap_or(cfg.seed());
    let snap = ControlSnapshot::from_tracking(&net, &log, at, measure).map_err(Failure::input)?;
    let (earned, actual, time) = match measure {
        ValueMeasure::WorkPeriods => ("TED", "TAD", "ED(t)"),
        ValueMeasure::Cost => ("EV", "AC", "ES"),
    };
    let forecast = stochastic_forecast(&net, &snap, &store, &cfg.forecast(seed)).map_err(forecast_failure)?;
    let r = forecast.result;

    println!("project: {} (BPD {})", net.name(), store.bpd);
    println!("store: {} runs, seed {}, {measure}", store.records.len(), store.config.master_seed);
    println!("control period AD: {at}");
    println!("{earned}: {:.4}", snap.earned);
    println!("{actual}: {:.4}", snap.actual);
    println!("{time}: {:.2}", snap.earned_time);
    println!("PPI: {:.4} ({})", snap.ppi, pct(snap.ppi));
    if let Some(a) = r.anomaly_percentile {
        println!("anomaly percentile: {a:.4} ({})", pct(a));
    }
    if let Some(c) = &forecast.classifier {
        print_cv("classification (finish later than BPD)", c);
    }
    if let Some(m) = &forecast.regressor {
        print_cv("regression (AFD - BPD)", m);
    }
    println!();
    println!("method: {}", r.method);
    println!("forecast seed: {seed}");
    if let Some(p) = r.p_delay {
        println!("p_delay: {p:.4} ({})", pct(p));
        println!("finish late: {}", if p > 0.5 { "likely" } else { "unlikely" });
    }
    println!("expected deviation: {:.3}", r.expected_deviation);
    println!("EDAC: {:.2}", r.edac);
    println!("basis: {}", basis_name(r.basis));
    if net.has_costs() {
        let esm = esm_at(&net, &log, at).map_err(forecast_failure)?;
        println!("ESM EDAC: {:.2}", esm.edac);
    }

    let banner = format!("sedm control AD={at} seed={seed} store_seed={} runs={}", store.config.master_seed, store.records.len());
    if let Some(path) = &outputs.cloud {
        if let Some(cloud) = &forecast.cloud {
            cloud.write_csv(create_csv(path, &banner)?).map_err(|e| Failure::writing(path, e))?;
        } else {
            eprintln!("note: no point cloud at AD {at} (basis {}); {} not written", basis_name(r.basis), path.display());
        }
    }
    if let Some(path) = &outputs.grid {
        match &forecast.cloud {
            Some(cloud) => {
                let kde = KdeModel::fit_cloud(cloud, &cfg.forecast(seed).kde).map_err(Failure::runtime)?;
                let (hx, hy) = kde.bandwidths();
                let range = |v: Vec<f64>, h: f64| {
                    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo - h, hi + h)
                };
                let grid = kde.density_grid(range(cloud.xs(), hx), range(cloud.ys(), hy), 100, 100);
                grid.write_csv(create_csv(path, &banner)?).map_err(|e| Failure::writing(path, e))?;
            }
            None => eprintln!("note: no point cloud at AD {at}; {} not written", path.display()),
        }
    }
    if let Some(dir) = &outputs.cv {
        for (name, model) in [("classification.csv", &forecast.classifier), ("regression.csv", &forecast.regressor)] {
            if let Some(m) = model {
                let path = dir.join(name);
                m.report.write_csv(create_csv(&path, &banner)?).map_err(|e| Failure::writing(&path, e))?;
            }
        }
    }
    Ok(())
}

fn basis_name(b: sedm_core::bench::Basis) -> &'static str {
    use sedm_core::bench::Basis;
    match b {
        Basis::Plan => "plan",
        Basis::Model => "model",
        Basis::Degenerate => "degenerate",
        Basis::Observed => "observed",
    }
}

#[allow(clippy::too_many_arguments)]
fn benchmark(
    cfg: &Config,
    project_path: &Path,
    tracking_path: &Path,
    rd: Option<f64>,
    methods: &[Method],
    store_paths: &[PathBuf],
    seed: Option<u64>,
    checkpoints: Option<Vec<u32>>,
    out_dir: &Path,
) -> Result<(), Failure> {
    let net = project(project_path)?;
    let log = tracking(tracking_path, &net)?;
    let mut loaded: Vec<SimulationStore> = Vec::new();
    for p in store_paths {
        let s = load_store(p, Some(&net)).map_err(|e| store_failure(p, e))?;
        if loaded.iter().any(|o| o.measure() == s.measure()) {
            return Err(Failure::Input(format!("{}: a second {} store was given", p.display(), s.measure())));
        }
        loaded.push(s);
    }
    let stores = Stores {
        work: loaded.iter().find(|s| s.measure() == ValueMeasure::WorkPeriods),
        cost: loaded.iter().find(|s| s.measure() == ValueMeasure::Cost),
    };
    for &m in methods {
        let present = match m {
            Method::Esm => true,
            Method::Sedm => stores.work.is_some(),
            Method::Sevm => stores.cost.is_some(),
        };
        if !present {
            return Err(Failure::Input(format!(
                "{m} needs a {} store (sedm simulate --measure {})",
                m.measure(),
                m.measure()
            )));
        }
    }
    let rd = match rd {
        Some(v) => v,
        None => log
            .completion_period()
            .ok_or_else(|| Failure::Input("tracking does not reach completion; pass --rd".into()))? as f64,
    };
    let seed = seed.unwrap_or(cfg.seed());
    let mut config = cfg.benchmark(seed);
    if let Some(c) = checkpoints {
        if c.iter().any(|&p| p > 100) {
            return Err(Failure::Input("checkpoints are percentages between 0 and 100".into()));
        }
        config.checkpoints = c;
    }
    let report = run_benchmark(&net, &log, rd, methods, &stores, &config).map_err(forecast_failure)?;
    write_benchmark(&report, &net, seed, &loaded, out_dir)?;

    println!("project: {} (BPD {}, RD {rd})", net.name(), report.bpd);
    println!("forecast seed: {seed}");
    println!("\n{:<6} {:>9}", "method", "MAPE %");
    for s in &report.series {
        println!("{:<6} {:>9.4}", s.method.as_str(), s.mape);
    }
    println!();
    let mut head = format!("{:>8} {:>5}", "percent", "AD");
    for s in &report.series {
        head.push_str(&format!(" {:>9}", s.method.as_str()));
    }
    println!("{head}");
    for row in &report.checkpoints {
        let mut line = format!("{:>7}% {:>5}", row.percent, row.ad);
        for r in &row.results {
            line.push_str(&format!(" {:>9.2}", r.edac));
        }
        println!("{line}");
    }
    println!("\nwrote forecasts.csv, summary.csv, checkpoints.csv, edac.svg and mape.svg to {}", out_dir.display());
    Ok(())
}

fn write_benchmark(
    report: &MapeReport,
    net: &ProjectNetwork,
    seed: u64,
    stores: &[SimulationStore],
    dir: &Path,
) -> Result<(), Failure> {
    let store_note: Vec<String> = stores
        .iter()
        .map(|s| format!("{0}_store_seed={1} {0}_store_runs={2}", s.measure(), s.config.master_seed, s.records.len()))
        .collect();
    let banner = format!("sedm benchmark seed={seed} rd={} {}", report.rd, store_note.join(" "));
    let emit = |name: &str, f: &dyn Fn(BufWriter<File>) -> Result<(), String>| {
        let path = dir.join(name);
        f(create_csv(&path, &banner)?).map_err(|e| Failure::writing(&path, e))
    };
    emit("forecasts.csv", &|w| report.write_forecasts_csv(w).map_err(|e| e.to_string()))?;
    emit("summary.csv", &|w| report.write_summary_csv(w).map_err(|e| e.to_string()))?;
    emit("checkpoints.csv", &|w| report.write_checkpoints_csv(w).map_err(|e| e.to_string()))?;

    let series: Vec<Series> = report
        .series
        .iter()
        .map(|s| Series {
            name: s.method.as_str().to_string(),
            points: s.results.iter().map(|r| (r.ad as f64, r.edac)).collect(),
        })
        .collect();
    let edac = svg::line_chart(
        &format!("{}: EDAC per control period", net.name()),
        &banner,
        "control period AD",
        "EDAC",
        &series,
        Some(("RD", report.rd)),
    );
    write_text(&dir.join("edac.svg"), &edac)?;
    let bars: Vec<(String, f64)> = report.series.iter().map(|s| (s.method.as_str().to_string(), s.mape)).collect();
    let mape = svg::bar_chart(&format!("{}: MAPE of the final duration forecast", net.name()), &banner, "MAPE %", &bars);
    write_text(&dir.join("mape.svg"), &mape)?;
    Ok(())
}
