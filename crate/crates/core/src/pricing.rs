//! Option contract terms, payoffs, and pricers: Monte Carlo on exact terminal
//! samples, closed forms for one and two keywords, and a nested-quadrature
//! oracle.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::calibration::CorrMatrix;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_with_breaks};
use crate::sde::GbmTerminalSampler;
use crate::stats::std_normal_cdf;

/// Minimum number of Monte Carlo paths accepted by the pricers.
pub const MIN_PATHS: usize = 1000;
/// Default Monte Carlo path count.
pub const DEFAULT_PATHS: usize = 100_000;

const CHUNK: usize = 4096;
const TAIL: f64 = 8.0;

/// Weights of a broad-match contract. Row `j` gives the weight of every
/// underlying sub-keyword in candidate keyword `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadWeights {
    rows: Vec<Vec<f64>>,
    n_underlying: usize,
}

impl BroadWeights {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_underlying = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n_underlying == 0 {
            return Err(Error::invalid("broad-match weights must be non-empty"));
        }
        for row in &rows {
            if row.len() != n_underlying {
                return Err(Error::DimensionMismatch {
                    what: "broad-match weight row",
                    expected: n_underlying,
                    actual: row.len(),
                });
            }
            if let Some(w) = row.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
                return Err(Error::invalid(format!("broad-match weight {w} must be finite and >= 0")));
            }
        }
        Ok(Self { rows, n_underlying })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_candidates(&self) -> usize {
        self.rows.len()
    }

    pub fn n_underlying(&self) -> usize {
        self.n_underlying
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatchType {
    Exact,
    Broad(BroadWeights),
}

/// Terms of an n-keyword m-click option.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionSpec {
    keywords: Vec<String>,
    fixed_cpc: Vec<f64>,
    clicks: f64,
    maturity: f64,
    rate: f64,
    matching: MatchType,
}

impl OptionSpec {
    /// `fixed_cpc[i]` is the strike of `keywords[i]`; `maturity` is in years.
    pub fn new(keywords: Vec<String>, fixed_cpc: Vec<f64>, clicks: f64, maturity: f64, rate: f64) -> Result<Self> {
        Self::with_match(keywords, fixed_cpc, clicks, maturity, rate, MatchType::Exact)
    }

    pub fn with_match(
        keywords: Vec<String>,
        fixed_cpc: Vec<f64>,
        clicks: f64,
        maturity: f64,
        rate: f64,
        matching: MatchType,
    ) -> Result<Self> {
        if keywords.is_empty() {
            return Err(Error::EmptyKeywordSet("option has no keywords".into()));
        }
        if fixed_cpc.len() != keywords.len() {
            return Err(Error::DimensionMismatch {
                what: "fixed CPC vector",
                expected: keywords.len(),
                actual: fixed_cpc.len(),
            });
        }
        if let Some(f) = fixed_cpc.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::invalid(format!("fixed CPC {f} must be > 0")));
        }
        if !(clicks >= 1.0 && clicks.is_finite()) {
            return Err(Error::invalid(format!("click count m = {clicks} must be >= 1")));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::invalid(format!("maturity T = {maturity} must be > 0")));
        }
        if !rate.is_finite() {
            return Err(Error::invalid("interest rate must be finite"));
        }
        if let MatchType::Broad(w) = &matching {
            if w.n_candidates() != keywords.len() {
                return Err(Error::DimensionMismatch {
                    what: "broad-match weight rows",
                    expected: keywords.len(),
                    actual: w.n_candidates(),
                });
            }
        }
        Ok(Self {
            keywords,
            fixed_cpc,
            clicks,
            maturity,
            rate,
            matching,
        })
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn fixed_cpc(&self) -> &[f64] {
        &self.fixed_cpc
    }

    pub fn clicks(&self) -> f64 {
        self.clicks
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn matching(&self) -> &MatchType {
        &self.matching
    }

    /// Number of candidate keywords.
    pub fn n(&self) -> usize {
        self.keywords.len()
    }

    /// Dimension of the CPC vector the payoff reads: `n` for exact match,
    /// the sub-keyword count for broad match.
    pub fn underlying_dim(&self) -> usize {
        match &self.matching {
            MatchType::Exact => self.n(),
            MatchType::Broad(w) => w.n_underlying(),
        }
    }

    pub fn with_clicks(&self, clicks: f64) -> Result<Self> {
        Self::with_match(self.keywords.clone(), self.fixed_cpc.clone(), clicks, self.maturity, self.rate, self.matching.clone())
    }

    pub fn with_maturity(&self, maturity: f64) -> Result<Self> {
        Self::with_match(self.keywords.clone(), self.fixed_cpc.clone(), self.clicks, maturity, self.rate, self.matching.clone())
    }

    pub fn with_fixed_cpc(&self, fixed_cpc: Vec<f64>) -> Result<Self> {
        Self::with_match(self.keywords.clone(), fixed_cpc, self.clicks, self.maturity, self.rate, self.matching.clone())
    }

    /// Payoff of one click at CPC vector `c`.
    pub fn payoff(&self, c: &[f64]) -> Result<f64> {
        match &self.matching {
            MatchType::Exact => payoff_exact(c, &self.fixed_cpc),
            MatchType::Broad(w) => payoff_broad(c, w, &self.fixed_cpc),
        }
    }

    /// Payoff and the index of the exercised candidate (`None` when the
    /// payoff is zero). Ties go to the lowest index. Dimensions are trusted.
    pub(crate) fn payoff_choice(&self, c: &[f64]) -> (f64, Option<usize>) {
        let mut best = 0.0;
        let mut choice = None;
        for (j, f) in self.fixed_cpc.iter().enumerate() {
            let value = match &self.matching {
                MatchType::Exact => c[j],
                MatchType::Broad(w) => w.rows[j].iter().zip(c).map(|(w, c)| w * c).sum(),
            } - f;
            if value > best {
                best = value;
                choice = Some(j);
            }
        }
        (best, choice)
    }

    fn check_market(&self, c0: &[f64], sigma: &[f64], corr: &CorrMatrix) -> Result<()> {
        let k = self.underlying_dim();
        for (what, len) in [("initial CPC vector", c0.len()), ("volatility vector", sigma.len()), ("correlation matrix", corr.dim())] {
            if len != k {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: k,
                    actual: len,
                });
            }
        }
        Ok(())
    }

    pub(crate) fn sampler(&self, c0: &[f64], sigma: &[f64], corr: &CorrMatrix, t: f64) -> Result<GbmTerminalSampler> {
        self.check_market(c0, sigma, corr)?;
        GbmTerminalSampler::new(c0, &vec![self.rate; c0.len()], sigma, corr, t)
    }
}

/// `max(C_1 - F_1, ..., C_n - F_n, 0)`.
pub fn payoff_exact(c: &[f64], fixed_cpc: &[f64]) -> Result<f64> {
    if c.len() != fixed_cpc.len() {
        return Err(Error::DimensionMismatch {
            what: "CPC vector",
            expected: fixed_cpc.len(),
            actual: c.len(),
        });
    }
    Ok(c.iter().zip(fixed_cpc).map(|(c, f)| c - f).fold(0.0, f64::max))
}

/// `max_j(sum_i w_ji C_i - F_j, 0)` over candidate keywords `j`.
pub fn payoff_broad(c: &[f64], weights: &BroadWeights, fixed_cpc: &[f64]) -> Result<f64> {
    if fixed_cpc.len() != weights.n_candidates() {
        return Err(Error::DimensionMismatch {
            what: "fixed CPC vector",
            expected: weights.n_candidates(),
            actual: fixed_cpc.len(),
        });
    }
    let mut best: f64 = 0.0;
    for (row, f) in weights.rows.iter().zip(fixed_cpc) {
        if let Some(index) = row.iter().enumerate().skip(c.len()).find(|(_, w)| **w > 0.0).map(|(i, _)| i) {
            return Err(Error::MissingSubKeyword {
                index,
                available: c.len(),
            });
        }
        let s: f64 = row.iter().zip(c).map(|(w, c)| w * c).sum();
        best = best.max(s - f);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mc,
    BsmClosed,
    DualStrikeClosed,
    Quadrature,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::BsmClosed => "bsm_closed",
            Method::DualStrikeClosed => "dual_strike_closed",
            Method::Quadrature => "quadrature",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mc" => Ok(Method::Mc),
            "bsm_closed" => Ok(Method::BsmClosed),
            "dual_strike_closed" => Ok(Method::DualStrikeClosed),
            "quadrature" => Ok(Method::Quadrature),
            other => Err(Error::invalid(format!("unknown pricing method '{other}'"))),
        }
    }
}

/// An option price. `pi` is always exactly `clicks * per_click`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceQuote {
    pub pi: f64,
    pub per_click: f64,
    pub method: Method,
    /// Standard error of `pi`; zero for deterministic methods.
    pub mc_std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl PriceQuote {
    fn new(spec: &OptionSpec, per_click: f64, per_click_se: f64, method: Method, n_paths: usize, seed: u64) -> Self {
        Self {
            pi: spec.clicks * per_click,
            per_click,
            method,
            mc_std_error: spec.clicks * per_click_se,
            n_paths,
            seed,
        }
    }

    fn deterministic(spec: &OptionSpec, per_click: f64, method: Method) -> Self {
        Self::new(spec, per_click, 0.0, method, 0, 0)
    }
}

/// `method,pi,per_click,stderr,n_paths,seed`
pub fn write_quotes_csv<W: Write>(quotes: &[PriceQuote], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "pi", "per_click", "stderr", "n_paths", "seed"])?;
    for q in quotes {
        w.write_record([
            q.method.name().to_string(),
            q.pi.to_string(),
            q.per_click.to_string(),
            q.mc_std_error.to_string(),
            q.n_paths.to_string(),
            q.seed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("quote report", e))?;
    Ok(())
}

/// Running mean and sum of squared deviations, merged in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n / n,
            m2: self.m2 + other.m2 + d * d * self.n * other.n / n,
        }
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        }
    }
}

/// Mean and standard error of each output of `f` over `n_paths` terminal
/// samples. The result does not depend on the rayon thread count.
pub(crate) fn mc_estimate<F>(sampler: &GbmTerminalSampler, seed: u64, n_paths: usize, n_out: usize, f: F) -> Vec<(f64, f64)>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let n = sampler.dim();
    let n_chunks = n_paths.div_ceil(CHUNK);
    let partial: Vec<Vec<Moments>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut scratch = vec![0.0; 2 * n];
            let mut c = vec![0.0; n];
            let mut out = vec![0.0; n_out];
            let mut acc = vec![Moments::default(); n_out];
            for p in chunk * CHUNK..((chunk + 1) * CHUNK).min(n_paths) {
                sampler.sample_into(seed, p, &mut scratch, &mut c);
                f(&c, &mut out);
                for (a, x) in acc.iter_mut().zip(&out) {
                    a.push(*x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); n_out];
    for chunk in partial {
        for (t, m) in total.iter_mut().zip(chunk) {
            *t = t.merge(m);
        }
    }
    total.iter().map(|m| (m.mean, m.std_error())).collect()
}

pub(crate) fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < MIN_PATHS {
        return Err(Error::invalid(format!("n_paths = {n_paths} is below the minimum of {MIN_PATHS}")));
    }
    Ok(())
}

/// Monte Carlo price `m e^{-rT} E[payoff(C(T))]` from exact risk-neutral
/// terminal samples. Works for exact and broad match.
pub fn price_mc(spec: &OptionSpec, c0: &[f64], sigma: &[f64], corr: &CorrMatrix, n_paths: usize, seed: u64) -> Result<PriceQuote> {
    check_paths(n_paths)?;
    let sampler = spec.sampler(c0, sigma, corr, spec.maturity)?;
    let disc = (-spec.rate * spec.maturity).exp();
    let est = mc_estimate(&sampler, seed, n_paths, 1, |c, out| out[0] = disc * spec.payoff_choice(c).0);
    Ok(PriceQuote::new(spec, est[0].0, est[0].1, Method::Mc, n_paths, seed))
}

fn require_exact(spec: &OptionSpec, n: usize, method: &str) -> Result<()> {
    if spec.matching != MatchType::Exact {
        return Err(Error::invalid(format!("{method} supports exact match only")));
    }
    if spec.n() != n {
        return Err(Error::DimensionMismatch {
            what: "keyword count",
            expected: n,
            actual: spec.n(),
        });
    }
    Ok(())
}

fn require_positive_vol(sigma: &[f64]) -> Result<()> {
    if let Some(s) = sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::Degenerate(format!(
            "volatility {s} must be > 0 for a closed form; use the deterministic limit"
        )));
    }
    Ok(())
}

/// Black-Scholes-Merton call value per click and its `(zeta_1, zeta_2)`.
pub(crate) fn bsm_call(c0: f64, f: f64, sigma: f64, r: f64, t: f64) -> (f64, f64, f64) {
    let s = sigma * t.sqrt();
    let z1 = ((c0 / f).ln() + (r + 0.5 * sigma * sigma) * t) / s;
    let z2 = z1 - s;
    (c0 * std_normal_cdf(z1) - f * (-r * t).exp() * std_normal_cdf(z2), z1, z2)
}

/// Closed-form price of a one-keyword option.
pub fn price_bsm_closed(spec: &OptionSpec, c0: f64, sigma: f64) -> Result<PriceQuote> {
    require_exact(spec, 1, "the BSM closed form")?;
    require_positive_vol(&[sigma])?;
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::invalid(format!("initial CPC {c0} must be > 0")));
    }
    let (v, _, _) = bsm_call(c0, spec.fixed_cpc[0], sigma, spec.rate, spec.maturity);
    Ok(PriceQuote::deterministic(spec, v, Method::BsmClosed))
}

/// Per-click value `e^{-rT} payoff(c0 e^{rT})` of the zero-volatility limit.
pub fn price_deterministic(spec: &OptionSpec, c0: &[f64]) -> Result<f64> {
    let g = (spec.rate * spec.maturity).exp();
    let forward: Vec<f64> = c0.iter().map(|c| c * g).collect();
    Ok(spec.payoff(&forward)? / g)
}

const DUAL_TOL: f64 = 1e-11;

/// Closed-form price of a two-keyword option as a sum of four
/// one-dimensional normal integrals. Requires `|rho| < 1`.
pub fn price_dual_strike_closed(spec: &OptionSpec, c0: &[f64], sigma: &[f64], rho: f64) -> Result<PriceQuote> {
    require_exact(spec, 2, "the dual-strike closed form")?;
    require_positive_vol(sigma)?;
    if c0.len() != 2 || sigma.len() != 2 {
        return Err(Error::DimensionMismatch {
            what: "initial CPC and volatility vectors",
            expected: 2,
            actual: c0.len().min(sigma.len()),
        });
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::Degenerate(format!("|rho| = {} must be < 1 for the closed form", rho.abs())));
    }
    let (r, t) = (spec.rate, spec.maturity);
    let f = &spec.fixed_cpc;
    let leg = |i: usize| -> Result<f64> {
        let j = 1 - i;
        let si = sigma[i] * t.sqrt();
        let sj = sigma[j] * t.sqrt();
        let ai = (r - 0.5 * sigma[i] * sigma[i]) * t;
        let aj = (r - 0.5 * sigma[j] * sigma[j]) * t;
        let kappa = ((c0[i] / f[i]).ln() + ai) / si;
        let root = (1.0 - rho * rho).sqrt();
        // Normalized log level of keyword j at which it ties with keyword i.
        let q = |u: f64| {
            let level = f[j] - f[i] + c0[i] * (ai - u * si).exp();
            if level <= 0.0 {
                f64::NEG_INFINITY
            } else {
                ((level / c0[j]).ln() - aj) / sj
            }
        };
        let spot = if kappa + si > -TAIL {
            integrate(
                |w| crate::stats::std_normal_pdf(w) * std_normal_cdf((q(w - si) + rho * w - rho * si) / root),
                -TAIL,
                kappa + si,
                DUAL_TOL,
            )?
            .value
        } else {
            0.0
        };
        let strike = if kappa > -TAIL {
            integrate(
                |u| crate::stats::std_normal_pdf(u) * std_normal_cdf((q(u) + rho * u) / root),
                -TAIL,
                kappa,
                DUAL_TOL,
            )?
            .value
        } else {
            0.0
        };
        Ok(c0[i] * spot - (-r * t).exp() * f[i] * strike)
    };
    let v = (leg(0)? + leg(1)?).max(0.0);
    Ok(PriceQuote::deterministic(spec, v, Method::DualStrikeClosed))
}

/// Default absolute tolerance of the quadrature oracle, relative to the
/// largest initial CPC.
pub const QUADRATURE_TOL: f64 = 1e-9;
const QUAD_LIMIT: f64 = 9.0;

struct Nested<'a> {
    log_c0: Vec<f64>,
    drift: Vec<f64>,
    /// Rows of `sigma_i sqrt(T) L`, with `L` the Cholesky factor.
    load: Vec<Vec<f64>>,
    f: &'a [f64],
    tol: Vec<f64>,
}

impl Nested<'_> {
    /// Integral over coordinates `level..n` given `eps[..level]`.
    fn inner(&self, level: usize, eps: &mut Vec<f64>, best: f64) -> Result<f64> {
        let n = self.f.len();
        let base: f64 = self.log_c0[level] + self.drift[level] + (0..level).map(|j| self.load[level][j] * eps[j]).sum::<f64>();
        let slope = self.load[level][level];
        // Keyword `level` overtakes the best payoff so far here.
        let kink = (((self.f[level] + best).ln()) - base) / slope;
        let mut err = None;
        let value = integrate_with_breaks(
            |x| {
                let pdf = crate::stats::std_normal_pdf(x);
                let payoff = (base + slope * x).exp() - self.f[level];
                let best_here = best.max(payoff);
                if level + 1 == n {
                    return pdf * best_here;
                }
                eps.push(x);
                let v = self.inner(level + 1, eps, best_here);
                eps.pop();
                match v {
                    Ok(v) => pdf * v,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                }
            },
            -QUAD_LIMIT,
            QUAD_LIMIT,
            &[kink],
            self.tol[level],
        )?
        .value;
        match err {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}

/// Independent oracle: nested adaptive quadrature of the expected payoff
/// over independent normal coordinates, with `n <= 3` and exact match.
pub fn price_quadrature(spec: &OptionSpec, c0: &[f64], sigma: &[f64], corr: &CorrMatrix) -> Result<PriceQuote> {
    if spec.matching != MatchType::Exact {
        return Err(Error::invalid("quadrature supports exact match only"));
    }
    let n = spec.n();
    if n > 3 {
        return Err(Error::invalid(format!("quadrature supports at most 3 keywords, got {n}")));
    }
    spec.check_market(c0, sigma, corr)?;
    require_positive_vol(sigma)?;
    let chol = crate::sde::CholeskyFactor::new(corr)?;
    let t = spec.maturity;
    let mut load = vec![vec![0.0; n]; n];
    for i in 0..n {
        if chol.get(i, i) < 1e-8 {
            return Err(Error::Degenerate("singular correlation matrix; the density collapses".into()));
        }
        for j in 0..=i {
            load[i][j] = sigma[i] * t.sqrt() * chol.get(i, j);
        }
    }
    let scale = c0.iter().cloned().fold(0.0, f64::max);
    let tol: Vec<f64> = (0..n).map(|l| QUADRATURE_TOL * scale * 1e-2f64.powi(l as i32)).collect();
    let nested = Nested {
        log_c0: c0.iter().map(|c| c.ln()).collect(),
        drift: sigma.iter().map(|s| (spec.rate - 0.5 * s * s) * t).collect(),
        load,
        f: &spec.fixed_cpc,
        tol,
    };
    let v = (-spec.rate * t).exp() * nested.inner(0, &mut Vec::with_capacity(n), 0.0)?;
    Ok(PriceQuote::deterministic(spec, v, Method::Quadrature))
}

/// Immediate exercise value against the discounted continuation value at an
/// intermediate state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyExerciseCheck {
    /// `m * payoff(c(t))`.
    pub immediate: f64,
    /// `m e^{-r(T-t)} E[payoff(C(T)) | C(t) = c(t)]`.
    pub continuation: f64,
    pub std_error: f64,
    /// `immediate <= continuation + 3 std_error`.
    pub holds: bool,
}

/// Compares exercising at time `t` (years since inception) with holding to
/// expiry, the right side by Monte Carlo.
pub fn check_no_early_exercise(
    spec: &OptionSpec,
    state: &[f64],
    t: f64,
    sigma: &[f64],
    corr: &CorrMatrix,
    n_paths: usize,
    seed: u64,
) -> Result<EarlyExerciseCheck> {
    if !(t >= 0.0 && t < spec.maturity) {
        return Err(Error::invalid(format!("time t = {t} must lie in [0, T)")));
    }
    let remaining = spec.with_maturity(spec.maturity - t)?;
    let immediate = spec.clicks * spec.payoff(state)?;
    let q = price_mc(&remaining, state, sigma, corr, n_paths, seed)?;
    Ok(EarlyExerciseCheck {
        immediate,
        continuation: q.pi,
        std_error: q.mc_std_error,
        holds: immediate <= q.pi + 3.0 * q.mc_std_error,
    })
}
