use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use ad_options::calibration::{estimate_corr, estimate_sigma};
use ad_options::cli::{config_hash, run, Command, RunConfig};
use ad_options::market_data::{load_series, log_returns, DataWindow, WindowRole};
use ad_options::Error;
use chrono::NaiveDate;
use tempfile::TempDir;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/cpc.csv")
}

const BASE: &str = "\
seed = 2024
training_start = 2012-03-01
training_end = 2012-03-31
test_start = 2012-04-01
test_end = 2012-04-14
keywords = hotel, flight, car
F = 3.8505, 4.6704, 6.2520
m = 100
T_days = 13
r = 0.05
n_paths = 5000
n_trials = 8
hedge_pricer = mc
hedge_paths = 2000
models = gbm, cev
n_simulations = 10
model = cev
grid_points = 7
";

fn config(extra: &str, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::parse(&format!("{BASE}{extra}")).unwrap();
    cfg.set("input", fixture().display().to_string()).unwrap();
    cfg.set("output_dir", out.display().to_string()).unwrap();
    cfg
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn every_command_is_byte_identical_across_runs_and_thread_counts() {
    let tmp = TempDir::new().unwrap();
    for command in Command::ALL {
        let mut outputs = Vec::new();
        for (run_id, threads) in [(0, 1), (1, 1), (2, 4)] {
            let dir = tmp.path().join(format!("{command}-{run_id}"));
            let cfg = config("", &dir);
            run(command, &cfg, Some(threads)).unwrap();
            outputs.push(read_dir(&dir));
        }
        assert!(outputs[0].len() >= 2, "{command} wrote too few files");
        assert_eq!(outputs[0], outputs[1], "{command}: two runs differ");
        assert_eq!(outputs[0], outputs[2], "{command}: 1 vs 4 threads differ");
    }
}

#[test]
fn manifest_records_hash_seed_and_version() {
    let tmp = TempDir::new().unwrap();
    let cfg = config("", tmp.path());
    let summary = run(Command::Price, &cfg, None).unwrap();
    let rows = csv_rows(&summary.output_dir.join("manifest.csv"));
    let map: BTreeMap<_, _> = rows.into_iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    assert_eq!(map["command"], "price");
    assert_eq!(map["seed"], "2024");
    assert_eq!(map["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(map["config_sha256"], config_hash(&cfg));
    assert_eq!(map["config_sha256"].len(), 64);
    assert_eq!(map["files"], "quotes.csv");
}

#[test]
fn calibrate_report_matches_library_estimates() {
    let tmp = TempDir::new().unwrap();
    let cfg = config("", tmp.path());
    run(Command::Calibrate, &cfg, None).unwrap();

    let day = |d| NaiveDate::from_ymd_opt(2012, 3, d).unwrap();
    let window = DataWindow::new(WindowRole::Training, day(1), day(31)).unwrap();
    let report = load_series(fixture(), &window).unwrap();
    let returns: Vec<_> = ["hotel", "flight", "car"]
        .iter()
        .map(|k| log_returns(report.series.iter().find(|s| s.keyword() == *k).unwrap()).unwrap())
        .collect();

    let params = csv_rows(&tmp.path().join("params.csv"));
    assert_eq!(params[0], ["keyword", "mu", "sigma"]);
    for (row, r) in params[1..].iter().zip(&returns) {
        let p = estimate_sigma(r).unwrap();
        assert_eq!(row[0], p.keyword);
        assert_eq!(row[1].parse::<f64>().unwrap(), p.mu);
        assert_eq!(row[2].parse::<f64>().unwrap(), p.sigma);
    }
    let corr = estimate_corr(&returns).unwrap().corr;
    let rows = csv_rows(&tmp.path().join("corr.csv"));
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(rows[i + 1][j + 1].parse::<f64>().unwrap(), corr.get(i, j));
        }
    }
    let rejected = csv_rows(&tmp.path().join("rejected.csv"));
    let names: Vec<&str> = rejected[1..].iter().map(|r| r[0].as_str()).collect();
    assert!(names.contains(&"free") && names.contains(&"sparse"));
}

#[test]
fn calibrate_on_rejected_keywords_fails_with_empty_report() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = config("", tmp.path());
    cfg.set("keywords", "free").unwrap();
    let err = run(Command::Calibrate, &cfg, None).unwrap_err();
    assert!(matches!(err, Error::EmptyKeywordSet(_)));
    assert_eq!(err.exit_code(), 3);
    assert_eq!(csv_rows(&tmp.path().join("params.csv")), [["keyword", "mu", "sigma"]]);
}

#[test]
fn one_keyword_price_reports_closed_form_and_mc() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = config("", tmp.path());
    cfg.set("keywords", "hotel").unwrap();
    cfg.set("F", "3.6").unwrap();
    cfg.set("n_paths", "200000").unwrap();
    run(Command::Price, &cfg, None).unwrap();
    let rows = csv_rows(&tmp.path().join("quotes.csv"));
    assert_eq!(rows[0], ["method", "pi", "per_click", "stderr", "n_paths", "seed"]);
    assert_eq!(rows[1][0], "bsm_closed");
    assert_eq!(rows[2][0], "mc");
    let closed: f64 = rows[1][1].parse().unwrap();
    let mc: f64 = rows[2][1].parse().unwrap();
    let se: f64 = rows[2][3].parse().unwrap();
    assert!((closed - mc).abs() < 3.0 * se, "closed {closed} mc {mc} se {se}");
}

#[test]
fn explicit_market_without_input_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = RunConfig::parse(&format!(
        "seed = 1\nc0 = 3.5, 4.2\nsigma = 0.3, 0.25\ncorr = 1, 0.2247; 0.2247, 1\nF = 3.8505, 4.6704\nm = 10\n\
         T_days = 31\nr = 0.05\nmethod = all\nn_paths = 100000\noutput_dir = {}\n",
        tmp.path().display()
    ))
    .unwrap();
    run(Command::Price, &cfg, None).unwrap();
    let rows = csv_rows(&tmp.path().join("quotes.csv"));
    let methods: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(methods, ["dual_strike_closed", "quadrature", "mc"]);
    let closed: f64 = rows[1][1].parse().unwrap();
    let quad: f64 = rows[2][1].parse().unwrap();
    assert!((closed - quad).abs() < 1e-6 * 10.0);
}

#[test]
fn backtest_with_zero_tolerance_finds_arbitrage_everywhere() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = config("epsilon = 0\n", tmp.path());
    cfg.set("model", "gbm").unwrap();
    run(Command::Backtest, &cfg, None).unwrap();
    let rows = csv_rows(&tmp.path().join("backtest.csv"));
    assert_eq!(rows[0], ["trial", "gamma_tilde", "r_tilde", "epsilon", "alpha", "verdict"]);
    assert_eq!(rows.len(), 9);
    for row in &rows[1..] {
        assert_ne!(row[5], "no_arbitrage", "{row:?}");
    }
    assert!(tmp.path().join("observed.csv").exists());
    let trace = csv_rows(&tmp.path().join("trace.csv"));
    assert_eq!(trace[0], ["day", "V", "delta_1", "delta_2", "delta_3", "Pi"]);
    assert_eq!(trace.len(), 15);
}

#[test]
fn revenue_summary_flags_argmax_and_reference() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = config("", tmp.path());
    cfg.set("keywords", "hotel").unwrap();
    cfg.set("F", "3.6").unwrap();
    run(Command::Revenue, &cfg, None).unwrap();
    let summary = csv_rows(&tmp.path().join("summary.csv"));
    assert_eq!(summary[0], ["point", "F_1", "D", "stderr", "boundary"]);
    assert_eq!(summary[1][0], "argmax");
    assert_eq!(summary[2][0], "reference");
    let surface = csv_rows(&tmp.path().join("surface.csv"));
    assert_eq!(surface[0], ["F_1", "D", "stderr"]);
    assert_eq!(surface.len(), 8);
    for row in &surface[1..] {
        assert!(row[1].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn simulate_dumps_fifty_paths_of_thirty_one_days() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = config("", tmp.path());
    cfg.set("model", "gbm").unwrap();
    cfg.set("n_paths", "50").unwrap();
    cfg.set("T_days", "31").unwrap();
    run(Command::Simulate, &cfg, None).unwrap();
    let rows = csv_rows(&tmp.path().join("paths.csv"));
    assert_eq!(rows[0], ["path", "step", "keyword", "value"]);
    assert_eq!(rows.len() - 1, 50 * 32 * 3);
}

fn adopt(args: &[&str]) -> (i32, String) {
    let out = Process::new(env!("CARGO_BIN_EXE_adopt")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write_config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let path = dir.join(name);
    let text = format!(
        "input = {}\noutput_dir = {}\n{BASE}{extra}",
        fixture().display(),
        dir.join("out").display()
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn binary_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let ok = write_config(tmp.path(), "ok.cfg", "");
    assert_eq!(adopt(&["calibrate", ok.to_str().unwrap()]).0, 0);

    let bad = write_config(tmp.path(), "bad.cfg", "colour = blue\n");
    let (code, err) = adopt(&["price", bad.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");

    let zero_clicks = tmp.path().join("m0.cfg");
    fs::write(&zero_clicks, fs::read_to_string(&ok).unwrap().replace("m = 100", "m = 0")).unwrap();
    assert_eq!(adopt(&["price", zero_clicks.to_str().unwrap()]).0, 2);

    let unknown_model = tmp.path().join("model.cfg");
    fs::write(&unknown_model, fs::read_to_string(&ok).unwrap().replace("model = cev", "model = heston")).unwrap();
    let (code, err) = adopt(&["simulate", unknown_model.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("heston"), "{err}");

    let empty = tmp.path().join("empty.cfg");
    fs::write(&empty, fs::read_to_string(&ok).unwrap().replace("keywords = hotel, flight, car", "keywords = free")).unwrap();
    assert_eq!(adopt(&["calibrate", empty.to_str().unwrap()]).0, 3);

    assert_ne!(adopt(&["frobnicate", ok.to_str().unwrap()]).0, 0);
}

#[test]
fn gof_flags_constant_series_as_degenerate() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("flat.csv");
    let mut csv = String::from("keyword,date,cpc\n");
    for d in 1..=31 {
        csv.push_str(&format!("flat,2012-03-{d:02},2.5\n"));
    }
    fs::write(&input, csv).unwrap();
    let mut cfg = config("", tmp.path());
    cfg.set("input", input.display().to_string()).unwrap();
    cfg.set("keywords", "flat").unwrap();
    run(Command::Gof, &cfg, None).unwrap();
    let rows = csv_rows(&tmp.path().join("gof.csv"));
    assert_eq!(rows[0], ["keyword", "sw_p", "lb_p", "gbm_ok"]);
    assert_eq!(rows[1][0], "flat");
    assert_eq!(rows[1][3], "false");
}
