use crate::calibration::{estimate_corr, estimate_sigma, write_params_csv, CorrMatrix, GbmParams};
use crate::error::{Error, Result};
use crate::hedging::{
    backtest_hedge, no_arbitrage_fraction, synthetic_backtests, write_backtest_csv, write_trace_csv, BacktestConfig,
    HedgePricer, PiAccounting, DEFAULT_CONVERSION_DAYS, DEFAULT_EPSILON, DEFAULT_HEDGE_PATHS,
};
use crate::market_data::{load_series, log_returns, DataWindow, KeywordSeries, LoadReport, WindowRole};
use crate::pricing::{
    price_bsm_closed, price_dual_strike_closed, price_mc, price_quadrature, write_quotes_csv, BroadWeights, MatchType,
    Method, OptionSpec, DEFAULT_PATHS,
};
use crate::revenue::{
    expected_spot, revenue_surface, write_summary_csv, write_surface_csv, RevenueGrid, RevenueMethod,
};
use crate::sde::{derive_seed, simulate_path, DriftMode, SdeKind, SdeModel, DEFAULT_MEAN_REVERSION};
use crate::stats::{gof_report, similarity_report, write_gof_csv, write_similarity_csv, DEFAULT_ALPHA};
use crate::DAY;

use super::{Command, Outputs, RunConfig, RunSummary};

/// Calibrated (or explicitly configured) market state for a set of keywords.
struct Market {
    names: Vec<String>,
    /// CPC at option inception.
    c0: Vec<f64>,
    params: Vec<GbmParams>,
    corr: CorrMatrix,
    /// Mean CPC over the calibration window (long-run level of the
    /// mean-reverting models).
    mean_levels: Vec<f64>,
    /// Observed test-window CPCs by day, when a test window is configured.
    observed: Option<Vec<Vec<f64>>>,
}

impl Market {
    fn sigma(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.sigma).collect()
    }
}

fn calibration_role(cfg: &RunConfig) -> Result<WindowRole> {
    cfg.value_or("calibration_window", WindowRole::Training)
}

fn required_window(cfg: &RunConfig, role: WindowRole) -> Result<DataWindow> {
    cfg.window(role)?
        .ok_or_else(|| Error::invalid(format!("a {role:?} window is required").to_lowercase()))
}

fn load(cfg: &RunConfig, window: &DataWindow) -> Result<LoadReport> {
    let input = cfg.path("input").ok_or_else(|| Error::invalid("missing config key `input`"))?;
    load_series(input, window)
}

/// The accepted series for `names` (all accepted series when `None`), in
/// the requested order.
fn select(report: &LoadReport, names: Option<&[String]>) -> Result<Vec<KeywordSeries>> {
    let Some(names) = names else {
        return Ok(report.series.clone());
    };
    names
        .iter()
        .map(|name| {
            if let Some(s) = report.series.iter().find(|s| s.keyword() == name) {
                return Ok(s.clone());
            }
            match report.rejected.iter().find(|r| &r.keyword == name) {
                Some(r) => Err(Error::EmptyKeywordSet(format!("keyword '{name}' was rejected ({})", r.reason))),
                None => Err(Error::invalid(format!("keyword '{name}' is not in the input"))),
            }
        })
        .collect()
}

/// Per-keyword parameters, the correlation matrix and whether it needed a
/// PSD repair.
fn calibrate_series(series: &[KeywordSeries]) -> Result<(Vec<GbmParams>, CorrMatrix, bool)> {
    let returns = series.iter().map(log_returns).collect::<Result<Vec<_>>>()?;
    let params = returns.iter().map(estimate_sigma).collect::<Result<Vec<_>>>()?;
    if series.len() == 1 {
        return Ok((params, CorrMatrix::identity(1), false));
    }
    let est = estimate_corr(&returns)?;
    Ok((params, est.corr, est.repaired))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Names of the CPC series the option reads (sub-keywords for broad match).
fn underlying_names(cfg: &RunConfig) -> Option<Vec<String>> {
    if cfg.get("match").is_some_and(|m| m.eq_ignore_ascii_case("broad")) {
        cfg.list("sub_keywords")
    } else {
        cfg.list("keywords")
    }
}

fn market(cfg: &RunConfig) -> Result<Market> {
    let names = underlying_names(cfg);
    if cfg.has("input") {
        return market_from_data(cfg, names);
    }
    let c0 = cfg.floats("c0")?.ok_or_else(|| Error::invalid("need `input` or an explicit `c0`"))?;
    let n = c0.len();
    let sigma = cfg.floats("sigma")?.ok_or_else(|| Error::invalid("missing config key `sigma`"))?;
    let rate: f64 = cfg.value_or("r", 0.0)?;
    let mu = cfg.floats("mu")?.unwrap_or_else(|| vec![rate; n]);
    let names = names.unwrap_or_else(|| (1..=n).map(|i| format!("k{i}")).collect());
    for (what, len) in [("keywords", names.len()), ("sigma", sigma.len()), ("mu", mu.len())] {
        if len != n {
            return Err(Error::invalid(format!("`{what}` has {len} entries but `c0` has {n}")));
        }
    }
    let corr = match cfg.matrix("corr")? {
        Some(rows) => CorrMatrix::from_rows(&rows)?,
        None => CorrMatrix::identity(n),
    };
    let params = names
        .iter()
        .zip(mu.iter().zip(&sigma))
        .map(|(k, (&m, &s))| GbmParams::new(k.clone(), m, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(Market {
        names,
        mean_levels: c0.clone(),
        c0,
        params,
        corr,
        observed: None,
    })
}

fn market_from_data(cfg: &RunConfig, names: Option<Vec<String>>) -> Result<Market> {
    let role = calibration_role(cfg)?;
    let window = required_window(cfg, role)?;
    let report = load(cfg, &window)?;
    let series = select(&report, names.as_deref())?;
    if series.is_empty() {
        return Err(Error::EmptyKeywordSet("no keyword covers the calibration window".into()));
    }
    let names: Vec<String> = series.iter().map(|s| s.keyword().to_string()).collect();
    let (params, corr, _) = calibrate_series(&series)?;
    let mean_levels = series.iter().map(|s| mean(&s.cpcs())).collect();
    let observed: Option<Vec<Vec<f64>>> = match cfg.window(WindowRole::Test)? {
        Some(test) => {
            let test_series = select(&load(cfg, &test)?, Some(&names))?;
            Some((0..test.days()).map(|d| test_series.iter().map(|s| s.cpcs()[d]).collect()).collect())
        }
        None => None,
    };
    let c0 = match &observed {
        Some(rows) => rows[0].clone(),
        None => series.iter().map(|s| s.last_cpc().expect("window is non-empty")).collect(),
    };
    Ok(Market {
        names,
        c0,
        params,
        corr,
        mean_levels,
        observed,
    })
}

fn option_spec(cfg: &RunConfig, market: &Market) -> Result<OptionSpec> {
    let matching = match cfg.get("match").unwrap_or("exact").to_ascii_lowercase().as_str() {
        "exact" => MatchType::Exact,
        "broad" => {
            let rows = cfg.matrix("weights")?.ok_or_else(|| Error::invalid("broad match needs `weights`"))?;
            MatchType::Broad(BroadWeights::new(rows)?)
        }
        other => return Err(Error::invalid(format!("unknown match type '{other}'"))),
    };
    let keywords = match &matching {
        MatchType::Exact => market.names.clone(),
        MatchType::Broad(w) => cfg
            .list("keywords")
            .unwrap_or_else(|| (1..=w.n_candidates()).map(|j| format!("candidate{j}")).collect()),
    };
    let f = cfg.floats("F")?.ok_or_else(|| Error::invalid("missing config key `F`"))?;
    let t_days: f64 = cfg.required("T_days")?;
    let spec = OptionSpec::with_match(keywords, f, cfg.required("m")?, t_days * DAY, cfg.required("r")?, matching)?;
    if spec.underlying_dim() != market.c0.len() {
        return Err(Error::DimensionMismatch {
            what: "underlying keyword count",
            expected: spec.underlying_dim(),
            actual: market.c0.len(),
        });
    }
    Ok(spec)
}

/// Loads and calibrates; writes `params.csv`, `corr.csv`, `rejected.csv`.
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<RunSummary> {
    let role = calibration_role(cfg)?;
    let window = required_window(cfg, role)?;
    let report = load(cfg, &window)?;
    let mut out = Outputs::new(cfg)?;
    out.write("rejected.csv", |w| report.write_rejections(w))?;
    let series = match select(&report, cfg.list("keywords").as_deref()) {
        Ok(s) if s.is_empty() => Err(Error::EmptyKeywordSet(format!(
            "all {} keywords in the input were rejected",
            report.rejected.len()
        ))),
        other => other,
    };
    let series = match series {
        Err(e @ Error::EmptyKeywordSet(_)) => {
            out.write("params.csv", |w| write_params_csv(&[], w))?;
            out.finish(Command::Calibrate, cfg, "no usable keywords".into())?;
            return Err(e);
        }
        other => other?,
    };
    let (params, corr, repaired) = calibrate_series(&series)?;
    out.write("params.csv", |w| write_params_csv(&params, w))?;
    let names: Vec<String> = params.iter().map(|p| p.keyword.clone()).collect();
    out.write("corr.csv", |w| corr.write_csv(&names, w))?;
    let flat = params.iter().filter(|p| p.is_flat()).count();
    let message = format!(
        "calibrated {} keywords ({} rejected, {flat} flat){}",
        params.len(),
        report.rejected.len(),
        if repaired { "; correlation matrix repaired to PSD" } else { "" }
    );
    out.finish(Command::Calibrate, cfg, message)
}

/// GBM validation per keyword (`gof.csv`) and, when `models` is set, the
/// similarity of simulated paths to the observed series (`similarity.csv`).
pub fn cmd_gof(cfg: &RunConfig) -> Result<RunSummary> {
    let role = calibration_role(cfg)?;
    let window = required_window(cfg, role)?;
    let report = load(cfg, &window)?;
    let series = select(&report, cfg.list("keywords").as_deref())?;
    if series.is_empty() {
        return Err(Error::EmptyKeywordSet("no keyword covers the window".into()));
    }
    let alpha: f64 = cfg.value_or("alpha", DEFAULT_ALPHA)?;
    let lags: Option<usize> = cfg.parse_value("lags")?;
    let mut out = Outputs::new(cfg)?;
    out.write("rejected.csv", |w| report.write_rejections(w))?;
    let gof = series
        .iter()
        .map(|s| gof_report(s.keyword(), &log_returns(s)?.values(), alpha, lags))
        .collect::<Result<Vec<_>>>()?;
    out.write("gof.csv", |w| write_gof_csv(&gof, w))?;
    let ok = gof.iter().filter(|g| g.gbm_ok).count();
    let degenerate = gof.iter().filter(|g| g.degenerate).count();
    let mut message = format!("{ok}/{} keywords consistent with GBM ({degenerate} degenerate)", gof.len());

    if let Some(models) = cfg.list("models") {
        let kinds = models.iter().map(|m| m.parse::<SdeKind>()).collect::<Result<Vec<_>>>()?;
        let seed = cfg.seed()?;
        let n_sim: usize = cfg.value_or("n_simulations", 100)?;
        let k: f64 = cfg.value_or("k", DEFAULT_MEAN_REVERSION)?;
        let mut sims = Vec::new();
        for (ki, s) in series.iter().enumerate() {
            let params = estimate_sigma(&log_returns(s)?)?;
            if params.is_flat() {
                continue;
            }
            let levels = s.cpcs();
            let steps = levels.len() - 1;
            for (mi, kind) in kinds.iter().enumerate() {
                let model = SdeModel::from_calibration(*kind, std::slice::from_ref(&params), &[mean(&levels)], k)?;
                let run_seed = derive_seed(derive_seed(seed, ki as u64), mi as u64);
                let paths = simulate_path(&levels[..1], &model, &CorrMatrix::identity(1), steps as f64 * DAY, steps, DriftMode::RealWorld, n_sim, run_seed)?;
                let simulated: Vec<Vec<f64>> = (0..n_sim).map(|p| paths.keyword_series(p, 0)).collect();
                sims.push(similarity_report(s.keyword(), kind.name(), &levels, &simulated, alpha)?);
            }
        }
        out.write("similarity.csv", |w| write_similarity_csv(&sims, w))?;
        message.push_str(&format!("; {} similarity reports", sims.len()));
    }
    out.finish(Command::Gof, cfg, message)
}

/// Prices the configured option; writes `quotes.csv`.
pub fn cmd_price(cfg: &RunConfig) -> Result<RunSummary> {
    let market = market(cfg)?;
    let spec = option_spec(cfg, &market)?;
    let sigma = market.sigma();
    let n_paths: usize = cfg.value_or("n_paths", DEFAULT_PATHS)?;
    let requested = cfg.list("method").unwrap_or_else(|| vec!["auto".into()]);
    let exact = *spec.matching() == MatchType::Exact;
    let smooth = sigma.iter().all(|s| *s > 0.0);
    let mut methods = Vec::new();
    for m in &requested {
        match m.to_ascii_lowercase().as_str() {
            "auto" | "all" => {
                if exact && smooth && spec.n() == 1 {
                    methods.push(Method::BsmClosed);
                }
                if exact && smooth && spec.n() == 2 && market.corr.get(0, 1).abs() < 1.0 {
                    methods.push(Method::DualStrikeClosed);
                }
                if m == "all" && exact && smooth && spec.n() <= 3 {
                    methods.push(Method::Quadrature);
                }
                methods.push(Method::Mc);
            }
            other => methods.push(other.parse()?),
        }
    }
    methods.dedup();
    let seed = if methods.contains(&Method::Mc) { cfg.seed()? } else { 0 };
    let quotes = methods
        .iter()
        .map(|m| match m {
            Method::Mc => price_mc(&spec, &market.c0, &sigma, &market.corr, n_paths, seed),
            Method::BsmClosed => price_bsm_closed(&spec, market.c0[0], sigma[0]),
            Method::DualStrikeClosed => price_dual_strike_closed(&spec, &market.c0, &sigma, market.corr.get(0, 1)),
            Method::Quadrature => price_quadrature(&spec, &market.c0, &sigma, &market.corr),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outputs::new(cfg)?;
    out.write("quotes.csv", |w| write_quotes_csv(&quotes, w))?;
    let message = quotes
        .iter()
        .map(|q| format!("{}: pi = {:.6} (stderr {:.2e})", q.method, q.pi, q.mc_std_error))
        .collect::<Vec<_>>()
        .join("; ");
    out.finish(Command::Price, cfg, message)
}

fn backtest_config(cfg: &RunConfig) -> Result<BacktestConfig> {
    let pricer = match cfg.get("hedge_pricer").unwrap_or("auto").to_ascii_lowercase().as_str() {
        "auto" => HedgePricer::Auto,
        "closed" | "closed_form" => HedgePricer::ClosedForm,
        "mc" => HedgePricer::MonteCarlo {
            n_paths: cfg.value_or("hedge_paths", DEFAULT_HEDGE_PATHS)?,
        },
        other => return Err(Error::invalid(format!("unknown hedge pricer '{other}'"))),
    };
    let accounting = match cfg.get("accounting").unwrap_or("self_financing").to_ascii_lowercase().as_str() {
        "self_financing" => PiAccounting::SelfFinancing,
        "mark_to_market" => PiAccounting::MarkToMarket,
        other => return Err(Error::invalid(format!("unknown accounting '{other}'"))),
    };
    Ok(BacktestConfig {
        epsilon: cfg.value_or("epsilon", DEFAULT_EPSILON)?,
        conversion_days: cfg.value_or("d_conv", DEFAULT_CONVERSION_DAYS)?,
        rate_scale: cfg.value_or("rate_scale", 1.0)?,
        pricer,
        accounting,
        seed: derive_seed(cfg.seed()?, u64::MAX),
    })
}

/// Delta-hedging backtests on synthetic paths of the configured model
/// (`backtest.csv`, `trace.csv`) and, with a test window, on the observed
/// path (`observed.csv`, `observed_trace.csv`).
pub fn cmd_backtest(cfg: &RunConfig) -> Result<RunSummary> {
    let market = market(cfg)?;
    let spec = option_spec(cfg, &market)?;
    let bt = backtest_config(cfg)?;
    let seed = cfg.seed()?;
    let kind: SdeKind = cfg.value_or("model", SdeKind::Gbm)?;
    let k: f64 = cfg.value_or("k", DEFAULT_MEAN_REVERSION)?;
    let n_trials: usize = cfg.value_or("n_trials", 100)?;
    let model = SdeModel::from_calibration(kind, &market.params, &market.mean_levels, k)?;
    let sigma = market.sigma();
    let reports = synthetic_backtests(&spec, &market.c0, &model, &market.corr, &sigma, n_trials, &bt, seed)?;
    let mut out = Outputs::new(cfg)?;
    out.write("backtest.csv", |w| write_backtest_csv(&reports, w))?;
    if let Some(first) = reports.first() {
        out.write("trace.csv", |w| write_trace_csv(first, w))?;
    }
    let mut message = format!(
        "{kind} paths: {:.1}% of {n_trials} trials without arbitrage",
        100.0 * no_arbitrage_fraction(&reports)
    );
    if let Some(rows) = &market.observed {
        let days = ((spec.maturity() / DAY).round() as usize + 1).min(rows.len());
        let observed = backtest_hedge(&spec, &rows[..days], &sigma, &market.corr, &bt)?;
        out.write("observed.csv", |w| write_backtest_csv(std::slice::from_ref(&observed), w))?;
        out.write("observed_trace.csv", |w| write_trace_csv(&observed, w))?;
        message.push_str(&format!("; observed path: {}", observed.verdict));
    }
    out.finish(Command::Backtest, cfg, message)
}

/// Revenue difference over a grid of fixed CPCs (`surface.csv`,
/// `summary.csv`).
pub fn cmd_revenue(cfg: &RunConfig) -> Result<RunSummary> {
    let mut market = market(cfg)?;
    if let Some(rows) = market.observed.take() {
        market.c0 = rows[0].clone();
    }
    let n = market.c0.len();
    let mut cfg_f = cfg.clone();
    if !cfg.has("F") {
        let f: Vec<String> = market.c0.iter().map(f64::to_string).collect();
        cfg_f.set("F", f.join(","))?;
    }
    let spec = option_spec(&cfg_f, &market)?;
    let lo = cfg.floats("grid_lo")?.unwrap_or_else(|| market.c0.iter().map(|c| 0.5 * c).collect());
    let hi = cfg.floats("grid_hi")?.unwrap_or_else(|| market.c0.iter().map(|c| 1.5 * c).collect());
    if lo.len() != n || hi.len() != n {
        return Err(Error::invalid(format!("`grid_lo` and `grid_hi` need {n} entries")));
    }
    let default_points = match n {
        1 => 201,
        2 => 41,
        _ => 11,
    };
    let points: usize = cfg.value_or("grid_points", default_points)?;
    let bounds: Vec<(f64, f64)> = lo.into_iter().zip(hi).collect();
    let grid = RevenueGrid::uniform(&bounds, points)?;
    let sigma = market.sigma();
    let method = match cfg.get("revenue_method").unwrap_or(if n == 1 { "closed" } else { "mc" }) {
        "closed" => RevenueMethod::ClosedForm,
        "mc" => RevenueMethod::MonteCarlo {
            n_paths: cfg.value_or("n_paths", DEFAULT_PATHS)?,
            seed: cfg.seed()?,
        },
        other => return Err(Error::invalid(format!("unknown revenue method '{other}'"))),
    };
    let curve = revenue_surface(&spec, &market.c0, &sigma, &market.corr, &grid, method)?;
    let mut out = Outputs::new(cfg)?;
    out.write("surface.csv", |w| write_surface_csv(&curve, w))?;
    out.write("summary.csv", |w| write_summary_csv(&curve, w))?;
    let best = curve.optimum_point();
    let reference: Vec<String> = market
        .c0
        .iter()
        .map(|c| format!("{:.4}", expected_spot(*c, spec.rate(), spec.maturity())))
        .collect();
    let message = format!(
        "max D = {:.6} at F = {:?}{}; reference F = ({}) gives D = {:.6}",
        best.d,
        best.fixed_cpc,
        if best.boundary { " (grid boundary)" } else { "" },
        reference.join(", "),
        curve.reference.d
    );
    out.finish(Command::Revenue, cfg, message)
}

/// Simulated path dump `paths.csv` (`path,step,keyword,value`).
pub fn cmd_simulate(cfg: &RunConfig) -> Result<RunSummary> {
    let kind: SdeKind = cfg.required("model")?;
    let market = market(cfg)?;
    let seed = cfg.seed()?;
    let t_days: f64 = cfg.required("T_days")?;
    let n_steps: usize = cfg.value_or("n_steps", t_days.round() as usize)?;
    let n_paths: usize = cfg.value_or("n_paths", 50)?;
    let k: f64 = cfg.value_or("k", DEFAULT_MEAN_REVERSION)?;
    let drift = match cfg.get("drift").unwrap_or("real") {
        "real" => DriftMode::RealWorld,
        "risk_neutral" => DriftMode::RiskNeutral(cfg.required("r")?),
        other => return Err(Error::invalid(format!("unknown drift mode '{other}'"))),
    };
    let model = SdeModel::from_calibration(kind, &market.params, &market.mean_levels, k)?;
    let paths = simulate_path(&market.c0, &model, &market.corr, t_days * DAY, n_steps, drift, n_paths, seed)?;
    let mut out = Outputs::new(cfg)?;
    out.write("paths.csv", |w| paths.write_csv(Some(&market.names), w))?;
    let note = if paths.has_negative() { " (some values negative)" } else { "" };
    let message = format!("{n_paths} {kind} paths x {n_steps} steps written to {}{note}", out.dir().display());
    out.finish(Command::Simulate, cfg, message)
}
