use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sedm_core::curves::{planned_curve, CumulativeCurve, TrackingLog, ValueMeasure};
use sedm_core::files::{load_project, write_tracking};
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn sedm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sedm")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = sedm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn field(out: &str, key: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no {key} in\n{out}"));
    line[key.len()..].split_whitespace().next().unwrap().parse().unwrap()
}

/// Data rows of a CSV written with a leading `#` banner line.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn simulate(dir: &Path, project: &Path, runs: u32, seed: u64, measure: &str) -> PathBuf {
    let out = dir.join(format!("{measure}-{runs}-{seed}.store"));
    ok(&["simulate", s(project), "--runs", &runs.to_string(), "--seed", &seed.to_string(), "--measure", measure, "--out", s(&out)]);
    out
}

fn on_plan_tracking(dir: &Path, project: &Path) -> PathBuf {
    let net = load_project(project).unwrap().network;
    let log = TrackingLog::from_schedule(&net, &net.baseline_schedule());
    let path = dir.join("on_plan.toml");
    fs::write(&path, write_tracking(&net, &log)).unwrap();
    path
}

#[test]
fn plan_reports_sp_and_round_trips_curve() {
    let dir = TempDir::new().unwrap();
    let out = ok(&["plan", s(&fixture("office.toml")), "--out-dir", s(dir.path())]);
    assert!(out.contains("SP: 0.666 (n_s = 9, n_t = 13"), "{out}");
    assert_eq!(field(&out, "BPD:"), 126.0);
    assert_eq!(field(&out, "TPD_final:"), 141.0);

    let net = load_project(&fixture("office.toml")).unwrap().network;
    let mem = planned_curve(&net, &net.baseline_schedule(), ValueMeasure::WorkPeriods).unwrap();
    let file = CumulativeCurve::read_csv(fs::read(dir.path().join("tpd.csv")).unwrap().as_slice()).unwrap();
    assert_eq!(file, mem);
    let svg = fs::read_to_string(dir.path().join("tpd.svg")).unwrap();
    assert_eq!(polyline_sizes(&svg), vec![mem.values().len()]);
    assert_eq!(rows(&dir.path().join("schedule.csv")).len(), 13);
}

#[test]
fn serial_project_bpd_equals_tpd() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("serial.toml");
    let mut text = String::from("name = \"serial\"\n");
    for (i, pd) in [3, 5, 2, 7].iter().enumerate() {
        let preds = if i == 0 { String::new() } else { format!("\"S{i}\"") };
        text.push_str(&format!(
            "\n[[activity]]\nid = \"S{}\"\npredecessors = [{preds}]\npd = {pd}\ndistribution = {{ type = \"uniform\", lo = {pd}.0, hi = {}.0 }}\n",
            i + 1,
            pd + 2
        ));
    }
    fs::write(&path, text).unwrap();
    let out = ok(&["plan", s(&path)]);
    assert_eq!(field(&out, "BPD:"), 17.0);
    assert_eq!(field(&out, "TPD_final:"), 17.0);
}

#[test]
fn malformed_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "name = \"x\"\n\n[[activity]]\nid = \"A\"\npredecessors = [\"B\"]\npd = 3\ndistribution = { type = \"uniform\", lo = 1.0, hi = 2.0 }\n").unwrap();
    let out = sedm(&["plan", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml:3:") && err.contains('B'), "{err}");

    fs::write(&path, "name = \"x\"\n[[activity]\n").unwrap();
    assert_eq!(sedm(&["plan", s(&path)]).status.code(), Some(2));
    assert_eq!(sedm(&["plan", "/nonexistent/project.toml"]).status.code(), Some(2));

    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "folds = 1\n").unwrap();
    let out = sedm(&["--config", s(&cfg), "plan", s(&fixture("office.toml"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_and_records_runs() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.store");
    let b = dir.path().join("b.store");
    for p in [&a, &b] {
        ok(&["simulate", s(&fixture("office.toml")), "--runs", "400", "--seed", "17", "--out", s(p)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = dir.path().join("c.store");
    ok(&["simulate", s(&fixture("discrete.toml")), "--out", s(&c)]);
    let head = fs::read_to_string(&c).unwrap();
    assert!(head.lines().take(5).any(|l| l == "# n_runs=25000"), "{}", &head[..200]);

    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "runs = 123\nseed = 4\n").unwrap();
    let d = dir.path().join("d.store");
    let out = ok(&["--config", s(&cfg), "simulate", s(&fixture("discrete.toml")), "--out", s(&d)]);
    assert_eq!((field(&out, "runs:"), field(&out, "seed:")), (123.0, 4.0));
}

#[test]
fn simulate_matches_enumeration() {
    // S1 in {3, 5}, S2 in {4 (0.7), 6}, S3 in {2 (0.4), 5}; late when the sum exceeds 12.
    let mut p_late = 0.0;
    for (a, pa) in [(3.0, 0.5), (5.0, 0.5)] {
        for (b, pb) in [(4.0, 0.7), (6.0, 0.3)] {
            for (c, pc) in [(2.0, 0.4), (5.0, 0.6)] {
                if a + b + c > 12.0 {
                    p_late += pa * pb * pc;
                }
            }
        }
    }
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("d.store");
    let report = ok(&["simulate", s(&fixture("discrete.toml")), "--runs", "100000", "--seed", "2", "--out", s(&out)]);
    let p = field(&report, "P(delay):");
    assert!((p - p_late).abs() < 0.01, "{p} vs {p_late}");
    assert!((field(&report, "mean AFD:") - 12.4).abs() < 0.05);
}

#[test]
fn control_reports_milestone() {
    let dir = TempDir::new().unwrap();
    let store = simulate(dir.path(), &fixture("office.toml"), 1500, 1, "work-periods");
    let cloud = dir.path().join("cloud.csv");
    let grid = dir.path().join("grid.csv");
    let out = ok(&[
        "control",
        s(&fixture("office.toml")),
        s(&fixture("office_tracking.toml")),
        "--store",
        s(&store),
        "--at",
        "45",
        "--cloud-out",
        s(&cloud),
        "--grid-out",
        s(&grid),
        "--cv-out",
        s(dir.path()),
    ]);
    assert!(out.contains("ED(t): 49.54\n"), "{out}");
    assert!(out.contains("PPI: 0.3932 (39.32%)"), "{out}");
    for col in ["Min", "1st Qu", "Median", "Mean", "3rd Qu", "Max"] {
        assert!(out.contains(col), "{col}");
    }
    for alg in ["lda", "cart", "knn", "ols", "ridge"] {
        assert!(out.lines().any(|l| l.starts_with(alg)), "{alg}");
    }
    let bpd = 126.0;
    let edac = field(&out, "EDAC:");
    let dev = field(&out, "expected deviation:");
    assert!((edac - (bpd + dev)).abs() < 0.006);
    assert_eq!(rows(&cloud).len(), 1500);
    assert_eq!(rows(&grid).len(), 100 * 100);
    assert!(fs::read_to_string(&cloud).unwrap().starts_with("# sedm control AD=45 seed=0"));
    assert_eq!(rows(&dir.path().join("classification.csv")).len(), 6);
    assert_eq!(rows(&dir.path().join("regression.csv")).len(), 12);
}

#[test]
fn control_zero_variance_on_plan() {
    let dir = TempDir::new().unwrap();
    let project = fixture("fixed.toml");
    let tracking = on_plan_tracking(dir.path(), &project);
    let store = simulate(dir.path(), &project, 300, 0, "work-periods");
    for at in ["2", "4", "6"] {
        let out = ok(&["control", s(&project), s(&tracking), "--store", s(&store), "--at", at]);
        assert_eq!(field(&out, "anomaly percentile:"), 0.0, "{out}");
        assert_eq!(field(&out, "p_delay:"), 0.0);
        assert_eq!(field(&out, "EDAC:"), 9.0);
    }
}

#[test]
fn control_input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let store = simulate(dir.path(), &fixture("discrete.toml"), 50, 0, "work-periods");
    let tracking = fixture("office_tracking.toml");
    let office = fixture("office.toml");
    let mismatch = sedm(&["control", s(&office), s(&tracking), "--store", s(&store), "--at", "10"]);
    assert_eq!(mismatch.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("fingerprint"));

    let good = simulate(dir.path(), &office, 50, 0, "work-periods");
    let late = sedm(&["control", s(&office), s(&tracking), "--store", s(&good), "--at", "500"]);
    assert_eq!(late.status.code(), Some(2));
}

fn polyline_sizes(svg: &str) -> Vec<usize> {
    svg.lines()
        .filter(|l| l.starts_with("<polyline"))
        .map(|l| l.split("points=\"").nth(1).unwrap().split('"').next().unwrap().split(' ').count())
        .collect()
}

#[test]
fn benchmark_two_period_series_matches_hand_mape() {
    let dir = TempDir::new().unwrap();
    let project = dir.path().join("one.toml");
    fs::write(
        &project,
        "name = \"one\"\n[[activity]]\nid = \"A\"\npredecessors = []\npd = 2\ncost_per_period = 1.0\ndistribution = { type = \"discrete\", atoms = [[2.0, 1.0]] }\n",
    )
    .unwrap();
    let tracking = dir.path().join("t.toml");
    fs::write(
        &tracking,
        "[[period]]\nperiod = 1\nprogress = [{ activity = \"A\", complete = 0.25 }]\n\n[[period]]\nperiod = 2\nprogress = [{ activity = \"A\", complete = 1.0 }]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("bench");
    ok(&["benchmark", s(&project), s(&tracking), "--methods", "ESM", "--checkpoints", "0,100", "--out-dir", s(&out_dir)]);
    // ES = 0.5 at AD 1 gives EDAC 1 + 1.5 / 0.5 = 4; AD 2 is finished at 2.
    let f = rows(&out_dir.join("forecasts.csv"));
    let edac: Vec<f64> = f.iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(edac, vec![4.0, 2.0]);
    let summary = rows(&out_dir.join("summary.csv"));
    let mape: f64 = summary[0][1].parse().unwrap();
    assert!((mape - 100.0 / 2.0 * (2.0 / 2.0 + 0.0)).abs() < 1e-12);
    assert_eq!(rows(&out_dir.join("checkpoints.csv")).len(), 2);
}

#[test]
fn benchmark_converges_and_plots_every_row() {
    let dir = TempDir::new().unwrap();
    let project = fixture("fixed.toml");
    let tracking = on_plan_tracking(dir.path(), &project);
    let work = simulate(dir.path(), &project, 200, 0, "work-periods");
    let cost = simulate(dir.path(), &project, 200, 0, "cost");
    let out_dir = dir.path().join("bench");
    ok(&["benchmark", s(&project), s(&tracking), "--rd", "10", "--store", s(&work), "--store", s(&cost), "--out-dir", s(&out_dir)]);
    let f = rows(&out_dir.join("forecasts.csv"));
    for method in ["ESM", "SEVM", "SEDM"] {
        let series: Vec<f64> = f.iter().filter(|r| r[0] == method).map(|r| r[2].parse().unwrap()).collect();
        assert_eq!(series.len(), 9);
        assert!(series.iter().all(|&e| e == 9.0), "{method}: {series:?}");
    }
    for r in rows(&out_dir.join("summary.csv")) {
        assert!((r[1].parse::<f64>().unwrap() - 10.0).abs() < 1e-12);
    }
    let svg = fs::read_to_string(out_dir.join("edac.svg")).unwrap();
    assert_eq!(polyline_sizes(&svg), vec![9, 9, 9]);
    assert!(svg.contains("seed=0"));
    let bars = fs::read_to_string(out_dir.join("mape.svg")).unwrap();
    assert_eq!(bars.matches("data-bar=").count(), 3);

    let missing = sedm(&["benchmark", s(&project), s(&tracking), "--store", s(&work), "--out-dir", s(&out_dir)]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn benchmark_bundled_fixture_favours_sedm() {
    let dir = TempDir::new().unwrap();
    let store = simulate(dir.path(), &fixture("office.toml"), 2000, 8, "work-periods");
    let cfg = dir.path().join("light.toml");
    fs::write(&cfg, "folds = 5\nrepeats = 1\n").unwrap();
    let out_dir = dir.path().join("bench");
    let out = ok(&[
        "--config",
        s(&cfg),
        "benchmark",
        s(&fixture("office.toml")),
        s(&fixture("office_tracking.toml")),
        "--methods",
        "ESM,SEDM",
        "--store",
        s(&store),
        "--out-dir",
        s(&out_dir),
    ]);
    let summary = rows(&out_dir.join("summary.csv"));
    let get = |m: &str| -> f64 { summary.iter().find(|r| r[0] == m).unwrap()[1].parse().unwrap() };
    assert!(get("SEDM") < get("ESM"), "{out}");
    let f = rows(&out_dir.join("forecasts.csv"));
    for m in ["ESM", "SEDM"] {
        let last = f.iter().rfind(|r| r[0] == m).unwrap();
        assert_eq!(last[2].parse::<f64>().unwrap(), 127.0);
    }
}
