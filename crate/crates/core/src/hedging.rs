//! Hedging deltas, delta-hedged backtests of the value-difference process,
//! and arbitrage classification against a risk-less benchmark.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::calibration::CorrMatrix;
use crate::error::{Error, Result};
use crate::pricing::{
    bsm_call, check_paths, mc_estimate, price_dual_strike_closed, MatchType, OptionSpec,
};
use crate::sde::{derive_seed, simulate_path, DriftMode, SdeModel};
use crate::stats::std_normal_cdf;
use crate::{DAY, DAYS_PER_YEAR};

/// Default arbitrage tolerance.
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Default day count used to convert the annual rate into the window benchmark.
pub const DEFAULT_CONVERSION_DAYS: f64 = 30.0;
/// Default Monte Carlo path count for daily repricing in backtests.
pub const DEFAULT_HEDGE_PATHS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMethod {
    ClosedForm,
    PathwiseMc,
    FdMc,
}

impl DeltaMethod {
    pub fn name(&self) -> &'static str {
        match self {
            DeltaMethod::ClosedForm => "closed_form",
            DeltaMethod::PathwiseMc => "pathwise_mc",
            DeltaMethod::FdMc => "fd_mc",
        }
    }
}

/// Per-keyword sensitivities `dV/dC_i` of the one-click option value.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaVector {
    pub delta: Vec<f64>,
    pub std_error: Vec<f64>,
    pub method: DeltaMethod,
}

/// `N(zeta_1)` for a one-keyword option.
pub fn delta_closed(spec: &OptionSpec, c0: f64, sigma: f64) -> Result<DeltaVector> {
    if spec.n() != 1 || *spec.matching() != MatchType::Exact {
        return Err(Error::invalid("closed-form delta needs a one-keyword exact-match option"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Degenerate(format!(
            "volatility {sigma}: the delta is a step function of moneyness"
        )));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::invalid(format!("initial CPC {c0} must be > 0")));
    }
    let (_, z1, _) = bsm_call(c0, spec.fixed_cpc()[0], sigma, spec.rate(), spec.maturity());
    Ok(DeltaVector {
        delta: vec![std_normal_cdf(z1)],
        std_error: vec![0.0],
        method: DeltaMethod::ClosedForm,
    })
}

/// Adds `d payoff / d C_k` at terminal state `c` (scaled by `C_k / C_k(0)`)
/// to `out`, returning the payoff.
fn pathwise(spec: &OptionSpec, c: &[f64], c0: &[f64], scale: f64, out: &mut [f64]) -> f64 {
    let (payoff, choice) = spec.payoff_choice(c);
    if let Some(j) = choice {
        match spec.matching() {
            MatchType::Exact => out[j] = scale * c[j] / c0[j],
            MatchType::Broad(w) => {
                for (k, wk) in w.rows()[j].iter().enumerate() {
                    out[k] = scale * wk * c[k] / c0[k];
                }
            }
        }
    }
    payoff
}

/// Per-click value and pathwise deltas from one set of terminal samples.
fn value_and_delta_mc(
    spec: &OptionSpec,
    c0: &[f64],
    sigma: &[f64],
    corr: &CorrMatrix,
    n_paths: usize,
    seed: u64,
) -> Result<(f64, f64, DeltaVector)> {
    check_paths(n_paths)?;
    let sampler = spec.sampler(c0, sigma, corr, spec.maturity())?;
    let k = spec.underlying_dim();
    let disc = (-spec.rate() * spec.maturity()).exp();
    let est = mc_estimate(&sampler, seed, n_paths, k + 1, |c, out| {
        out.fill(0.0);
        out[k] = disc * pathwise(spec, c, c0, disc, &mut out[..k]);
    });
    Ok((
        est[k].0,
        est[k].1,
        DeltaVector {
            delta: est[..k].iter().map(|e| e.0).collect(),
            std_error: est[..k].iter().map(|e| e.1).collect(),
            method: DeltaMethod::PathwiseMc,
        },
    ))
}

/// Pathwise Monte Carlo deltas
/// `e^{-rT} E[1{i exercised} C_i(T) / C_i(0)]` (for broad match the chosen
/// candidate's weight multiplies each sub-keyword term).
pub fn delta_mc(spec: &OptionSpec, c0: &[f64], sigma: &[f64], corr: &CorrMatrix, n_paths: usize, seed: u64) -> Result<DeltaVector> {
    Ok(value_and_delta_mc(spec, c0, sigma, corr, n_paths, seed)?.2)
}

/// Central finite differences of the Monte Carlo price with common random
/// numbers, bumping each initial CPC by `rel_bump * C_i(0)`.
pub fn delta_fd_mc(
    spec: &OptionSpec,
    c0: &[f64],
    sigma: &[f64],
    corr: &CorrMatrix,
    n_paths: usize,
    seed: u64,
    rel_bump: f64,
) -> Result<DeltaVector> {
    check_paths(n_paths)?;
    if !(rel_bump > 0.0 && rel_bump < 1.0) {
        return Err(Error::invalid(format!("relative bump {rel_bump} must lie in (0, 1)")));
    }
    let sampler = spec.sampler(c0, sigma, corr, spec.maturity())?;
    let k = spec.underlying_dim();
    let disc = (-spec.rate() * spec.maturity()).exp();
    // Exact sampling makes C_i(T) linear in C_i(0) for fixed noise.
    let est = mc_estimate(&sampler, seed, n_paths, k, |c, out| {
        let mut bumped = c.to_vec();
        for i in 0..k {
            bumped[i] = c[i] * (1.0 + rel_bump);
            let up = spec.payoff_choice(&bumped).0;
            bumped[i] = c[i] * (1.0 - rel_bump);
            let down = spec.payoff_choice(&bumped).0;
            bumped[i] = c[i];
            out[i] = disc * (up - down) / (2.0 * rel_bump * c0[i]);
        }
    });
    Ok(DeltaVector {
        delta: est.iter().map(|e| e.0).collect(),
        std_error: est.iter().map(|e| e.1).collect(),
        method: DeltaMethod::FdMc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    NoArbitrage,
    /// The hedged position grew faster than the benchmark: the option is
    /// underpriced and buying it is profitable.
    BuySideArbitrage,
    SellSideArbitrage,
    /// The initial portfolio value is too close to zero to form a rate.
    Degenerate,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::NoArbitrage => "no_arbitrage",
            Verdict::BuySideArbitrage => "buy_side_arbitrage",
            Verdict::SellSideArbitrage => "sell_side_arbitrage",
            Verdict::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Excess return `alpha` of a window growth rate `gamma` over the band
/// `[r_tilde - epsilon, r_tilde + epsilon]`, and the resulting verdict.
pub fn classify_arbitrage(gamma: f64, r_tilde: f64, epsilon: f64) -> (f64, Verdict) {
    if gamma > r_tilde + epsilon {
        (gamma - (r_tilde + epsilon), Verdict::BuySideArbitrage)
    } else if gamma < r_tilde - epsilon {
        (gamma - (r_tilde - epsilon), Verdict::SellSideArbitrage)
    } else {
        (0.0, Verdict::NoArbitrage)
    }
}

/// Risk-less return over a window: `e^{r * rate_scale * days / 365} - 1`.
pub fn benchmark_rate(r: f64, conversion_days: f64, rate_scale: f64) -> f64 {
    (r * rate_scale * conversion_days / DAYS_PER_YEAR).exp_m1()
}

/// How the option value and deltas are recomputed each day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HedgePricer {
    /// Closed forms for one keyword, Monte Carlo otherwise.
    Auto,
    /// BSM for one keyword, dual-strike (with finite-difference deltas) for two.
    ClosedForm,
    MonteCarlo { n_paths: usize },
}

/// How the value-difference process is accounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiAccounting {
    /// `Pi` changes by `m (dV - sum delta_i dC_i)` with deltas held over each
    /// day: the gain of the delta-hedged position.
    SelfFinancing,
    /// `Pi(t_k) = m (V(t_k) - sum delta_i(t_k) C_i(t_k))` at every day.
    MarkToMarket,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktestConfig {
    pub epsilon: f64,
    pub conversion_days: f64,
    pub rate_scale: f64,
    pub pricer: HedgePricer,
    pub accounting: PiAccounting,
    /// Seed of the Monte Carlo repricer; reused every day.
    pub seed: u64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            conversion_days: DEFAULT_CONVERSION_DAYS,
            rate_scale: 1.0,
            pricer: HedgePricer::Auto,
            accounting: PiAccounting::SelfFinancing,
            seed: 0,
        }
    }
}

/// One rebalancing day of a backtest.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub day: usize,
    /// Option value `m V(t_k)`.
    pub value: f64,
    pub delta: Vec<f64>,
    pub pi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeReport {
    pub trace: Vec<DayRecord>,
    pub gamma_tilde: f64,
    pub r_tilde: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub verdict: Verdict,
}

impl HedgeReport {
    pub fn pi_series(&self) -> Vec<f64> {
        self.trace.iter().map(|d| d.pi).collect()
    }

    fn degenerate(trace: Vec<DayRecord>, r_tilde: f64, epsilon: f64) -> Self {
        Self {
            trace,
            gamma_tilde: f64::NAN,
            r_tilde,
            epsilon,
            alpha: 0.0,
            verdict: Verdict::Degenerate,
        }
    }
}

/// Per-click value and deltas of the option with `tau` years left.
fn revalue(
    spec: &OptionSpec,
    c: &[f64],
    sigma: &[f64],
    corr: &CorrMatrix,
    tau: f64,
    cfg: &BacktestConfig,
) -> Result<(f64, Vec<f64>)> {
    let k = spec.underlying_dim();
    if tau <= 1e-12 {
        let mut delta = vec![0.0; k];
        let v = pathwise(spec, c, c, 1.0, &mut delta);
        return Ok((v, delta));
    }
    let live = spec.with_maturity(tau)?;
    let exact = *spec.matching() == MatchType::Exact;
    let flat = sigma.iter().all(|s| *s == 0.0);
    let pricer = match cfg.pricer {
        HedgePricer::Auto if exact && (spec.n() == 1 || flat) => HedgePricer::ClosedForm,
        HedgePricer::Auto => HedgePricer::MonteCarlo {
            n_paths: DEFAULT_HEDGE_PATHS,
        },
        p => p,
    };
    match pricer {
        HedgePricer::ClosedForm if exact && flat => {
            // Zero-volatility limit: payoff of the forward, discounted.
            let g = (live.rate() * tau).exp();
            let forward: Vec<f64> = c.iter().map(|c| c * g).collect();
            let mut delta = vec![0.0; k];
            let v = pathwise(&live, &forward, c, 1.0 / g, &mut delta) / g;
            Ok((v, delta))
        }
        HedgePricer::ClosedForm if exact && spec.n() == 1 => {
            let (v, z1, _) = bsm_call(c[0], spec.fixed_cpc()[0], sigma[0], spec.rate(), tau);
            Ok((v, vec![std_normal_cdf(z1)]))
        }
        HedgePricer::ClosedForm if exact && spec.n() == 2 => {
            let rho = corr.get(0, 1);
            let price = |c: &[f64]| price_dual_strike_closed(&live, c, sigma, rho).map(|q| q.per_click);
            let v = price(c)?;
            let mut delta = vec![0.0; 2];
            for i in 0..2 {
                let h = 1e-4 * c[i];
                let mut up = c.to_vec();
                let mut down = c.to_vec();
                up[i] += h;
                down[i] -= h;
                delta[i] = (price(&up)? - price(&down)?) / (2.0 * h);
            }
            Ok((v, delta))
        }
        HedgePricer::ClosedForm => Err(Error::invalid(
            "closed-form hedging supports one or two exact-match keywords",
        )),
        HedgePricer::MonteCarlo { n_paths } => {
            let (v, _, d) = value_and_delta_mc(&live, c, sigma, corr, n_paths, cfg.seed)?;
            Ok((v, d.delta))
        }
        HedgePricer::Auto => unreachable!("resolved above"),
    }
}

/// Delta-hedges the option along an observed daily path `observed[day][i]`
/// (day 0 is inception) and classifies the window growth rate of the
/// value-difference process.
pub fn backtest_hedge(
    spec: &OptionSpec,
    observed: &[Vec<f64>],
    sigma: &[f64],
    corr: &CorrMatrix,
    cfg: &BacktestConfig,
) -> Result<HedgeReport> {
    if observed.len() < 2 {
        return Err(Error::TooFewObservations {
            required: 2,
            actual: observed.len(),
        });
    }
    let k = spec.underlying_dim();
    for row in observed {
        if row.len() != k {
            return Err(Error::DimensionMismatch {
                what: "observed CPC vector",
                expected: k,
                actual: row.len(),
            });
        }
        if let Some(c) = row.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::Degenerate(format!("observed CPC {c} is not positive")));
        }
    }
    if !(cfg.epsilon >= 0.0) {
        return Err(Error::invalid(format!("tolerance epsilon = {} must be >= 0", cfg.epsilon)));
    }
    let m = spec.clicks();
    let r_tilde = benchmark_rate(spec.rate(), cfg.conversion_days, cfg.rate_scale);
    let mut trace: Vec<DayRecord> = Vec::with_capacity(observed.len());
    for (day, c) in observed.iter().enumerate() {
        let tau = spec.maturity() - day as f64 * DAY;
        let (v, delta) = revalue(spec, c, sigma, corr, tau, cfg)?;
        let mark = m * (v - delta.iter().zip(c).map(|(d, c)| d * c).sum::<f64>());
        let pi = match (cfg.accounting, trace.last()) {
            (PiAccounting::SelfFinancing, Some(prev)) => {
                let prev_c = &observed[day - 1];
                let hedge: f64 = prev.delta.iter().zip(c.iter().zip(prev_c)).map(|(d, (c, p))| d * (c - p)).sum();
                prev.pi + (m * v - prev.value) - m * hedge
            }
            _ => mark,
        };
        trace.push(DayRecord {
            day,
            value: m * v,
            delta,
            pi,
        });
    }
    let pi0 = trace[0].pi;
    let mean_c0 = observed[0].iter().sum::<f64>() / k as f64;
    if pi0.abs() < 1e-6 * m * mean_c0 {
        return Ok(HedgeReport::degenerate(trace, r_tilde, cfg.epsilon));
    }
    let gamma = (trace[trace.len() - 1].pi - pi0) / pi0;
    let (alpha, verdict) = classify_arbitrage(gamma, r_tilde, cfg.epsilon);
    Ok(HedgeReport {
        trace,
        gamma_tilde: gamma,
        r_tilde,
        epsilon: cfg.epsilon,
        alpha,
        verdict,
    })
}

/// Backtests `n_trials` synthetic windows simulated from `actual` under its
/// real-world drift, each hedged with a GBM pricer at `pricing_sigma`. The
/// window covers the option's life in daily steps. Trials whose simulated
/// CPC leaves the positive half-line are reported as degenerate.
#[allow(clippy::too_many_arguments)]
pub fn synthetic_backtests(
    spec: &OptionSpec,
    c0: &[f64],
    actual: &SdeModel,
    corr: &CorrMatrix,
    pricing_sigma: &[f64],
    n_trials: usize,
    cfg: &BacktestConfig,
    seed: u64,
) -> Result<Vec<HedgeReport>> {
    let n_days = (spec.maturity() / DAY).round() as usize;
    if n_days < 1 {
        return Err(Error::invalid("option maturity is shorter than one day"));
    }
    let t = n_days as f64 * DAY;
    let r_tilde = benchmark_rate(spec.rate(), cfg.conversion_days, cfg.rate_scale);
    (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let paths = simulate_path(c0, actual, corr, t, n_days, DriftMode::RealWorld, 1, derive_seed(seed, trial as u64))?;
            match backtest_hedge(spec, &paths.path_rows(0), pricing_sigma, corr, cfg) {
                Err(Error::Degenerate(_)) => Ok(HedgeReport::degenerate(Vec::new(), r_tilde, cfg.epsilon)),
                other => other,
            }
        })
        .collect()
}

/// Fraction of reports with verdict `no_arbitrage`.
pub fn no_arbitrage_fraction(reports: &[HedgeReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().filter(|r| r.verdict == Verdict::NoArbitrage).count() as f64 / reports.len() as f64
}

/// `trial,gamma_tilde,r_tilde,epsilon,alpha,verdict`
pub fn write_backtest_csv<W: Write>(reports: &[HedgeReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "gamma_tilde", "r_tilde", "epsilon", "alpha", "verdict"])?;
    for (i, r) in reports.iter().enumerate() {
        w.write_record([
            i.to_string(),
            r.gamma_tilde.to_string(),
            r.r_tilde.to_string(),
            r.epsilon.to_string(),
            r.alpha.to_string(),
            r.verdict.name().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("backtest report", e))?;
    Ok(())
}

/// `day,V,delta_1..delta_n,Pi`
pub fn write_trace_csv<W: Write>(report: &HedgeReport, out: W) -> Result<()> {
    let n = report.trace.first().map_or(0, |d| d.delta.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["day".to_string(), "V".to_string()];
    header.extend((1..=n).map(|i| format!("delta_{i}")));
    header.push("Pi".into());
    w.write_record(&header)?;
    for d in &report.trace {
        let mut row = vec![d.day.to_string(), d.value.to_string()];
        row.extend(d.delta.iter().map(f64::to_string));
        row.push(d.pi.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("hedge trace", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::price_bsm_closed;

    fn spec1(f: f64) -> OptionSpec {
        OptionSpec::new(vec!["k".into()], vec![f], 1.0, 31.0 * DAY, 0.05).unwrap()
    }

    #[test]
    fn classifier_is_piecewise() {
        let (a, v) = classify_arbitrage(0.004 + 0.08, 0.004, 0.05);
        assert!((a - 0.03).abs() < 1e-15);
        assert_eq!(v, Verdict::BuySideArbitrage);
        let (a, v) = classify_arbitrage(-0.1, 0.004, 0.05);
        assert!((a - (-0.1 - (0.004 - 0.05))).abs() < 1e-15);
        assert_eq!(v, Verdict::SellSideArbitrage);
        assert_eq!(classify_arbitrage(0.03, 0.004, 0.05), (0.0, Verdict::NoArbitrage));
        assert_eq!(classify_arbitrage(0.004, 0.004, 0.0).1, Verdict::NoArbitrage);
    }

    #[test]
    fn benchmark_matches_formula() {
        let r = benchmark_rate(0.05, 30.0, 1.0);
        assert!((r - 0.004_118_045).abs() < 1e-9);
    }

    #[test]
    fn closed_delta_limits_and_fd() {
        assert!(delta_closed(&spec1(0.01), 3.5, 0.3).unwrap().delta[0] > 0.999_999);
        assert!(delta_closed(&spec1(100.0), 3.5, 0.3).unwrap().delta[0] < 1e-9);
        let spec = spec1(3.8505);
        let h = 1e-4 * 3.5;
        let fd = (price_bsm_closed(&spec, 3.5 + h, 0.2263).unwrap().pi - price_bsm_closed(&spec, 3.5 - h, 0.2263).unwrap().pi) / (2.0 * h);
        assert!((fd - delta_closed(&spec, 3.5, 0.2263).unwrap().delta[0]).abs() < 1e-7);
    }

    #[test]
    fn mc_deltas_match_closed_form() {
        let spec = spec1(3.6);
        let exact = delta_closed(&spec, 3.5, 0.3).unwrap().delta[0];
        let pw = delta_mc(&spec, &[3.5], &[0.3], &CorrMatrix::identity(1), 200_000, 4).unwrap();
        assert!((pw.delta[0] - exact).abs() < 3.0 * pw.std_error[0]);
        let fd = delta_fd_mc(&spec, &[3.5], &[0.3], &CorrMatrix::identity(1), 200_000, 4, 1e-3).unwrap();
        assert!((fd.delta[0] - exact).abs() < 3.0 * fd.std_error[0] + 1e-4);
    }

    #[test]
    fn deterministic_path_grows_at_the_risk_free_rate() {
        let spec = spec1(3.0);
        let r = spec.rate();
        let path: Vec<Vec<f64>> = (0..=31).map(|d| vec![3.5 * (r * d as f64 * DAY).exp()]).collect();
        let cfg = BacktestConfig::default();
        let rep = backtest_hedge(&spec, &path, &[0.0], &CorrMatrix::identity(1), &cfg).unwrap();
        for d in &rep.trace {
            let tau = spec.maturity() - d.day as f64 * DAY;
            assert!((d.value - (path[d.day][0] - 3.0 * (-r * tau).exp())).abs() < 1e-12);
        }
        assert!((rep.gamma_tilde - (r * spec.maturity()).exp_m1()).abs() < 1e-12);
        assert_eq!(rep.verdict, Verdict::NoArbitrage);
    }

    #[test]
    fn out_of_the_money_flat_path_is_degenerate() {
        let path = vec![vec![1.0]; 32];
        let rep = backtest_hedge(&spec1(3.0), &path, &[0.0], &CorrMatrix::identity(1), &BacktestConfig::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Degenerate);
        assert!(rep.gamma_tilde.is_nan());
    }

    #[test]
    fn trace_csv_header() {
        let path: Vec<Vec<f64>> = (0..5).map(|d| vec![3.5 + 0.01 * d as f64, 4.0]).collect();
        let spec = OptionSpec::new(vec!["a".into(), "b".into()], vec![3.4, 4.1], 10.0, 4.0 * DAY, 0.05).unwrap();
        let cfg = BacktestConfig {
            pricer: HedgePricer::MonteCarlo { n_paths: 2000 },
            ..BacktestConfig::default()
        };
        let rep = backtest_hedge(&spec, &path, &[0.3, 0.3], &CorrMatrix::pair(0.2).unwrap(), &cfg).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&rep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("day,V,delta_1,delta_2,Pi\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
