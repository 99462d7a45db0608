//! Correlated CPC path simulation.
//!
//! Noise is drawn from counter-based ChaCha substreams: path `p` always reads
//! from stream `p` of the master seed, so results are bit-identical for any
//! thread count or evaluation order. Within a path, normals are consumed
//! step-major, keyword-minor. A one-step path and a terminal draw therefore
//! see exactly the same noise.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::calibration::{CorrMatrix, GbmParams};
use crate::error::{Error, Result};

/// Mean-reversion speed used for MRD, CIR and HWV unless configured otherwise.
pub const DEFAULT_MEAN_REVERSION: f64 = 0.5;

/// Random source for one path of a simulation.
pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Derives an independent child seed, e.g. one per backtest trial.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lower-triangular factor `L` with `L L^T = corr`, computed so that a
/// semidefinite matrix (e.g. a perfect correlation) still factors: a column
/// whose pivot vanishes is set to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
}

impl CholeskyFactor {
    pub fn new(corr: &CorrMatrix) -> Result<Self> {
        let n = corr.dim();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = corr.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d < -1e-8 {
                return Err(Error::Factorization(format!(
                    "negative pivot {d:e} at column {j}; matrix is not positive semidefinite"
                )));
            }
            let pivot = if d <= 1e-12 { 0.0 } else { d.sqrt() };
            l[j * n + j] = pivot;
            for i in (j + 1)..n {
                let mut s = corr.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = if pivot == 0.0 {
                    if s.abs() > 1e-6 {
                        return Err(Error::Factorization(format!(
                            "inconsistent entry ({i},{j}) after zero pivot"
                        )));
                    }
                    0.0
                } else {
                    s / pivot
                };
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// `out = L * eps`.
    pub fn apply(&self, eps: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i + 1];
            out[i] = row.iter().zip(eps).map(|(a, b)| a * b).sum();
        }
    }

    /// Draws one correlated standard-normal vector.
    pub(crate) fn draw<R: Rng>(&self, rng: &mut R, eps: &mut [f64], out: &mut [f64]) {
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        self.apply(eps, out);
    }
}

/// Correlated standard-normal noise laid out as `[path][step][keyword]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseArray {
    n_paths: usize,
    n_steps: usize,
    n_keywords: usize,
    data: Vec<f64>,
}

impl NoiseArray {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_keywords(&self) -> usize {
        self.n_keywords
    }

    pub fn get(&self, path: usize, step: usize) -> &[f64] {
        let off = (path * self.n_steps + step) * self.n_keywords;
        &self.data[off..off + self.n_keywords]
    }

    fn path(&self, path: usize) -> &[f64] {
        let len = self.n_steps * self.n_keywords;
        &self.data[path * len..(path + 1) * len]
    }
}

/// Standard-normal draws with correlation `corr`, independent across paths
/// and steps.
pub fn sample_correlated_normals(
    corr: &CorrMatrix,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<NoiseArray> {
    let chol = CholeskyFactor::new(corr)?;
    let n = chol.dim();
    let mut data = vec![0.0; n_paths * n_steps * n];
    if n_steps > 0 {
        data.par_chunks_mut(n_steps * n).enumerate().for_each(|(p, chunk)| {
            let mut rng = path_rng(seed, p);
            let mut eps = vec![0.0; n];
            for step in chunk.chunks_mut(n) {
                chol.draw(&mut rng, &mut eps, step);
            }
        });
    }
    Ok(NoiseArray {
        n_paths,
        n_steps,
        n_keywords: n,
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SdeKind {
    /// `dC = mu C dt + sigma C dW`
    Gbm,
    /// `dC = mu C dt + sigma sqrt(C) dW`
    Cev,
    /// `dC = k (mu - C) dt + sigma sqrt(C) dW`
    Mrd,
    /// `dC = k (mu - C) dt + sqrt(sigma) C dW`
    Cir,
    /// `dC = k (mu - C) dt + sigma dW`
    Hwv,
}

impl SdeKind {
    pub const ALL: [SdeKind; 5] = [SdeKind::Gbm, SdeKind::Cev, SdeKind::Mrd, SdeKind::Cir, SdeKind::Hwv];

    pub fn name(&self) -> &'static str {
        match self {
            SdeKind::Gbm => "gbm",
            SdeKind::Cev => "cev",
            SdeKind::Mrd => "mrd",
            SdeKind::Cir => "cir",
            SdeKind::Hwv => "hwv",
        }
    }

    pub fn is_mean_reverting(&self) -> bool {
        matches!(self, SdeKind::Mrd | SdeKind::Cir | SdeKind::Hwv)
    }
}

impl fmt::Display for SdeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SdeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SdeKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown model '{}'", s.trim())))
    }
}

/// Per-keyword coefficients. For the mean-reverting models `mu` is the
/// long-run CPC level; for GBM and CEV it is the drift rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeywordDynamics {
    pub mu: f64,
    pub sigma: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeModel {
    kind: SdeKind,
    params: Vec<KeywordDynamics>,
}

impl SdeModel {
    pub fn new(kind: SdeKind, params: Vec<KeywordDynamics>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::invalid("model needs at least one keyword"));
        }
        for (i, p) in params.iter().enumerate() {
            if !(p.sigma >= 0.0 && p.sigma.is_finite() && p.mu.is_finite()) {
                return Err(Error::invalid(format!(
                    "keyword {i}: sigma must be finite and >= 0, mu finite"
                )));
            }
            if kind.is_mean_reverting() && !(p.k > 0.0 && p.k.is_finite()) {
                return Err(Error::invalid(format!(
                    "keyword {i}: mean-reversion speed k must be > 0 for {kind}"
                )));
            }
        }
        Ok(Self { kind, params })
    }

    /// GBM with the given drifts and volatilities.
    pub fn gbm(mu: &[f64], sigma: &[f64]) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::DimensionMismatch {
                what: "drift vector",
                expected: sigma.len(),
                actual: mu.len(),
            });
        }
        Self::new(
            SdeKind::Gbm,
            mu.iter()
                .zip(sigma)
                .map(|(&mu, &sigma)| KeywordDynamics { mu, sigma, k: 0.0 })
                .collect(),
        )
    }

    /// Builds a model of `kind` from GBM calibration output. GBM and CEV take
    /// the estimated drift rate and volatility as they are. The mean-reverting
    /// models take the window's mean CPC level as their long-run level `mu`,
    /// the estimated volatility as `sigma`, and speed `k`.
    pub fn from_calibration(kind: SdeKind, params: &[GbmParams], mean_levels: &[f64], k: f64) -> Result<Self> {
        if mean_levels.len() != params.len() {
            return Err(Error::DimensionMismatch {
                what: "mean level vector",
                expected: params.len(),
                actual: mean_levels.len(),
            });
        }
        Self::new(
            kind,
            params
                .iter()
                .zip(mean_levels)
                .map(|(p, &level)| KeywordDynamics {
                    mu: if kind.is_mean_reverting() { level } else { p.mu },
                    sigma: p.sigma,
                    k: if kind.is_mean_reverting() { k } else { 0.0 },
                })
                .collect(),
        )
    }

    pub fn kind(&self) -> SdeKind {
        self.kind
    }

    pub fn params(&self) -> &[KeywordDynamics] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.sigma).collect()
    }

    fn check_initial(&self, c0: &[f64]) -> Result<()> {
        if c0.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "initial CPC vector",
                expected: self.dim(),
                actual: c0.len(),
            });
        }
        let ok = |c: f64| match self.kind {
            SdeKind::Gbm => c > 0.0 && c.is_finite(),
            SdeKind::Hwv => c.is_finite(),
            _ => c >= 0.0 && c.is_finite(),
        };
        if let Some(c) = c0.iter().find(|&&c| !ok(c)) {
            return Err(Error::invalid(format!("initial CPC {c} not allowed for {}", self.kind)));
        }
        Ok(())
    }

    /// One Euler step from `state` (internal, possibly negative for the
    /// truncated schemes) using correlated normals `z`.
    fn step(&self, drift: DriftMode, state: &mut [f64], z: &[f64], dt: f64) {
        let sq = dt.sqrt();
        for (i, (c, p)) in state.iter_mut().zip(&self.params).enumerate() {
            let pos = c.max(0.0);
            match self.kind {
                SdeKind::Gbm => {
                    let m = drift.rate(p.mu);
                    *c *= ((m - 0.5 * p.sigma * p.sigma) * dt + p.sigma * sq * z[i]).exp();
                }
                _ => {
                    let drift_term = match (drift, self.kind) {
                        (DriftMode::RiskNeutral(r), _) => r * pos,
                        (DriftMode::RealWorld, SdeKind::Cev) => p.mu * pos,
                        (DriftMode::RealWorld, SdeKind::Hwv) => p.k * (p.mu - *c),
                        (DriftMode::RealWorld, _) => p.k * (p.mu - pos),
                    };
                    let diffusion = match self.kind {
                        SdeKind::Cev | SdeKind::Mrd => p.sigma * pos.sqrt(),
                        SdeKind::Cir => p.sigma.sqrt() * pos,
                        SdeKind::Hwv => p.sigma,
                        SdeKind::Gbm => unreachable!(),
                    };
                    *c += drift_term * dt + diffusion * sq * z[i];
                }
            }
        }
    }

    /// Maps an internal state to the reported CPC (full truncation floors the
    /// square-root and proportional schemes at zero; HWV may go negative).
    fn observe(&self, c: f64) -> f64 {
        match self.kind {
            SdeKind::Gbm | SdeKind::Hwv => c,
            _ => c.max(0.0),
        }
    }
}

/// Which drift drives a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftMode {
    /// Each keyword's own drift.
    RealWorld,
    /// Risk-neutral: every drift becomes `r * C`.
    RiskNeutral(f64),
}

impl DriftMode {
    fn rate(&self, mu: f64) -> f64 {
        match self {
            DriftMode::RealWorld => mu,
            DriftMode::RiskNeutral(r) => *r,
        }
    }
}

/// Terminal CPCs `[path][keyword]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalSet {
    n_paths: usize,
    n_keywords: usize,
    values: Vec<f64>,
}

impl TerminalSet {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_keywords(&self) -> usize {
        self.n_keywords
    }

    pub fn path(&self, p: usize) -> &[f64] {
        &self.values[p * self.n_keywords..(p + 1) * self.n_keywords]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_keywords)
    }
}

/// Exact log-normal terminal sampler shared by the pricers.
#[derive(Debug, Clone)]
pub(crate) struct GbmTerminalSampler {
    c0: Vec<f64>,
    log_drift: Vec<f64>,
    vol: Vec<f64>,
    chol: CholeskyFactor,
}

impl GbmTerminalSampler {
    pub(crate) fn new(c0: &[f64], mu: &[f64], sigma: &[f64], corr: &CorrMatrix, t: f64) -> Result<Self> {
        let n = c0.len();
        for (what, len) in [("volatility vector", sigma.len()), ("drift vector", mu.len()), ("correlation matrix", corr.dim())] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    actual: len,
                });
            }
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("horizon T must be > 0, got {t}")));
        }
        if let Some(c) = c0.iter().find(|&&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::invalid(format!("initial CPC {c} must be > 0")));
        }
        if let Some(s) = sigma.iter().find(|&&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!("volatility {s} must be finite and >= 0")));
        }
        Ok(Self {
            c0: c0.to_vec(),
            log_drift: mu.iter().zip(sigma).map(|(m, s)| (m - 0.5 * s * s) * t).collect(),
            vol: sigma.iter().map(|s| s * t.sqrt()).collect(),
            chol: CholeskyFactor::new(corr)?,
        })
    }

    pub(crate) fn dim(&self) -> usize {
        self.c0.len()
    }

    /// Terminal CPCs of path `p` into `out`. `scratch` must hold `2 * dim`.
    pub(crate) fn sample_into(&self, seed: u64, p: usize, scratch: &mut [f64], out: &mut [f64]) {
        let n = self.dim();
        let mut rng = path_rng(seed, p);
        let (eps, z) = scratch.split_at_mut(n);
        self.chol.draw(&mut rng, eps, z);
        for i in 0..n {
            out[i] = self.c0[i] * (self.log_drift[i] + self.vol[i] * z[i]).exp();
        }
    }
}

/// Terminal CPCs of a GBM after `t` years by exact one-step sampling.
pub fn simulate_terminal_gbm(
    c0: &[f64],
    model: &SdeModel,
    corr: &CorrMatrix,
    t: f64,
    drift: DriftMode,
    n_paths: usize,
    seed: u64,
) -> Result<TerminalSet> {
    if model.kind() != SdeKind::Gbm {
        return Err(Error::invalid("terminal sampling is exact only for GBM"));
    }
    let mu: Vec<f64> = model.params().iter().map(|p| drift.rate(p.mu)).collect();
    let sampler = GbmTerminalSampler::new(c0, &mu, &model.sigmas(), corr, t)?;
    let n = sampler.dim();
    let mut values = vec![0.0; n_paths * n];
    values.par_chunks_mut(n).enumerate().for_each_init(
        || vec![0.0; 2 * n],
        |scratch, (p, out)| sampler.sample_into(seed, p, scratch, out),
    );
    Ok(TerminalSet {
        n_paths,
        n_keywords: n,
        values,
    })
}

/// Simulated CPC paths `[path][step][keyword]` with `n_steps + 1` time points.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    n_keywords: usize,
    n_paths: usize,
    n_steps: usize,
    dt: f64,
    seed: u64,
    values: Vec<f64>,
}

impl PathSet {
    /// Wraps observed data (one path) so it can be fed to the backtester.
    pub fn from_observations(levels: &[Vec<f64>], dt: f64) -> Result<Self> {
        let n_keywords = levels.first().map(|r| r.len()).unwrap_or(0);
        if n_keywords == 0 || levels.len() < 2 {
            return Err(Error::invalid("need at least two observation days with one keyword"));
        }
        if levels.iter().any(|r| r.len() != n_keywords) {
            return Err(Error::invalid("ragged observation rows"));
        }
        Ok(Self {
            n_keywords,
            n_paths: 1,
            n_steps: levels.len() - 1,
            dt,
            seed: 0,
            values: levels.concat(),
        })
    }

    pub fn n_keywords(&self) -> usize {
        self.n_keywords
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, path: usize, step: usize) -> &[f64] {
        let off = (path * (self.n_steps + 1) + step) * self.n_keywords;
        &self.values[off..off + self.n_keywords]
    }

    /// All time points of one path, one row per step.
    pub fn path_rows(&self, path: usize) -> Vec<Vec<f64>> {
        (0..=self.n_steps).map(|s| self.get(path, s).to_vec()).collect()
    }

    /// Series of one keyword along one path.
    pub fn keyword_series(&self, path: usize, keyword: usize) -> Vec<f64> {
        (0..=self.n_steps).map(|s| self.get(path, s)[keyword]).collect()
    }

    /// True if any simulated value is negative (possible only under HWV).
    pub fn has_negative(&self) -> bool {
        self.values.iter().any(|&v| v < 0.0)
    }

    /// CSV dump `path,step,keyword,value`.
    pub fn write_csv<W: Write>(&self, keywords: Option<&[String]>, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path", "step", "keyword", "value"])?;
        for p in 0..self.n_paths {
            for s in 0..=self.n_steps {
                for (k, v) in self.get(p, s).iter().enumerate() {
                    let label = keywords.map(|ks| ks[k].clone()).unwrap_or_else(|| k.to_string());
                    w.write_record([p.to_string(), s.to_string(), label, v.to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("path dump", e))?;
        Ok(())
    }
}

/// Euler-Maruyama paths driven by a pre-drawn noise array (common random
/// numbers across models). GBM uses exact log-Euler steps.
pub fn simulate_path_with_noise(
    c0: &[f64],
    model: &SdeModel,
    t: f64,
    drift: DriftMode,
    noise: &NoiseArray,
    seed: u64,
) -> Result<PathSet> {
    model.check_initial(c0)?;
    if noise.n_keywords() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "noise keyword count",
            expected: model.dim(),
            actual: noise.n_keywords(),
        });
    }
    let n_steps = noise.n_steps();
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be >= 1"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("horizon T must be > 0, got {t}")));
    }
    let n = model.dim();
    let dt = t / n_steps as f64;
    let stride = (n_steps + 1) * n;
    let mut values = vec![0.0; noise.n_paths() * stride];
    values.par_chunks_mut(stride).enumerate().for_each(|(p, out)| {
        let z = noise.path(p);
        let mut state = c0.to_vec();
        out[..n].copy_from_slice(c0);
        for s in 0..n_steps {
            model.step(drift, &mut state, &z[s * n..(s + 1) * n], dt);
            for (o, &c) in out[(s + 1) * n..(s + 2) * n].iter_mut().zip(&state) {
                *o = model.observe(c);
            }
        }
    });
    Ok(PathSet {
        n_keywords: n,
        n_paths: noise.n_paths(),
        n_steps,
        dt,
        seed,
        values,
    })
}

/// Samples correlated noise from `seed` and simulates `n_paths` paths.
#[allow(clippy::too_many_arguments)]
pub fn simulate_path(
    c0: &[f64],
    model: &SdeModel,
    corr: &CorrMatrix,
    t: f64,
    n_steps: usize,
    drift: DriftMode,
    n_paths: usize,
    seed: u64,
) -> Result<PathSet> {
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be >= 1"));
    }
    if corr.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "correlation matrix",
            expected: model.dim(),
            actual: corr.dim(),
        });
    }
    let noise = sample_correlated_normals(corr, n_paths, n_steps, seed)?;
    simulate_path_with_noise(c0, model, t, drift, &noise, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_corr(noise: &NoiseArray, i: usize, j: usize) -> f64 {
        let xs: Vec<(f64, f64)> = (0..noise.n_paths())
            .flat_map(|p| (0..noise.n_steps()).map(move |s| (p, s)))
            .map(|(p, s)| (noise.get(p, s)[i], noise.get(p, s)[j]))
            .collect();
        let n = xs.len() as f64;
        let (ma, mb) = xs.iter().fold((0.0, 0.0), |acc, (a, b)| (acc.0 + a / n, acc.1 + b / n));
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (a, b) in &xs {
            sab += (a - ma) * (b - mb);
            saa += (a - ma).powi(2);
            sbb += (b - mb).powi(2);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn identity_noise_is_uncorrelated() {
        let noise = sample_correlated_normals(&CorrMatrix::identity(3), 1000, 100, 7).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!(sample_corr(&noise, i, j).abs() < 0.02);
        }
    }

    #[test]
    fn perfect_correlation_copies_first_coordinate() {
        let noise = sample_correlated_normals(&CorrMatrix::pair(1.0).unwrap(), 100, 10, 3).unwrap();
        for p in 0..100 {
            for s in 0..10 {
                let z = noise.get(p, s);
                assert_eq!(z[0], z[1]);
            }
        }
    }

    #[test]
    fn three_keyword_correlation_matrix_is_reproduced() {
        let corr = CorrMatrix::from_rows(&[
            vec![1.0, 0.2341, 0.0242],
            vec![0.2341, 1.0, -0.0540],
            vec![0.0242, -0.0540, 1.0],
        ])
        .unwrap();
        let noise = sample_correlated_normals(&corr, 100_000, 1, 11).unwrap();
        assert!((sample_corr(&noise, 0, 1) - 0.2341).abs() < 0.02);
        assert!((sample_corr(&noise, 0, 2) - 0.0242).abs() < 0.02);
        assert!((sample_corr(&noise, 1, 2) + 0.0540).abs() < 0.02);
    }

    #[test]
    fn semidefinite_factor_of_indefinite_matrix_fails() {
        assert!(CholeskyFactor::new(&CorrMatrix::uniform(3, -0.9).unwrap()).is_err());
    }

    #[test]
    fn zero_vol_terminal_is_forward() {
        let model = SdeModel::gbm(&[0.3, 0.3], &[0.0, 0.0]).unwrap();
        let t = 31.0 / 365.0;
        let set = simulate_terminal_gbm(&[2.0, 5.0], &model, &CorrMatrix::identity(2), t, DriftMode::RiskNeutral(0.05), 50, 1).unwrap();
        for row in set.rows() {
            assert!((row[0] - 2.0 * (0.05 * t).exp()).abs() < 1e-14);
            assert!((row[1] - 5.0 * (0.05 * t).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn terminal_and_one_step_path_agree_exactly() {
        let corr = CorrMatrix::pair(0.3).unwrap();
        let model = SdeModel::gbm(&[0.1, -0.2], &[0.25, 0.4]).unwrap();
        let c0 = [3.5, 4.2];
        let t = 0.2;
        let term = simulate_terminal_gbm(&c0, &model, &corr, t, DriftMode::RealWorld, 200, 9).unwrap();
        let paths = simulate_path(&c0, &model, &corr, t, 1, DriftMode::RealWorld, 200, 9).unwrap();
        for p in 0..200 {
            assert_eq!(term.path(p), paths.get(p, 1));
            assert_eq!(paths.get(p, 0), &c0);
        }
    }

    #[test]
    fn hwv_equilibrium_is_constant() {
        let model = SdeModel::new(SdeKind::Hwv, vec![KeywordDynamics { mu: 2.5, sigma: 0.0, k: 0.5 }]).unwrap();
        let ps = simulate_path(&[2.5], &model, &CorrMatrix::identity(1), 1.0, 50, DriftMode::RealWorld, 3, 0).unwrap();
        for p in 0..3 {
            assert!(ps.keyword_series(p, 0).iter().all(|&v| v == 2.5));
        }
    }

    #[test]
    fn mrd_deterministic_relaxation() {
        let (mu, c0, k, t) = (2.0, 5.0, 0.5, 2.0);
        let n_steps = 2000;
        let model = SdeModel::new(SdeKind::Mrd, vec![KeywordDynamics { mu, sigma: 0.0, k }]).unwrap();
        let ps = simulate_path(&[c0], &model, &CorrMatrix::identity(1), t, n_steps, DriftMode::RealWorld, 1, 0).unwrap();
        let dt = t / n_steps as f64;
        for (s, v) in ps.keyword_series(0, 0).iter().enumerate() {
            let exact = mu + (c0 - mu) * (-k * s as f64 * dt).exp();
            // Euler global error is O(dt); constant ~ k^2 |c0 - mu| t / 2.
            assert!((v - exact).abs() < k * k * (c0 - mu).abs() * t * dt, "step {s}");
        }
    }

    #[test]
    fn truncated_models_never_negative() {
        for kind in [SdeKind::Cev, SdeKind::Mrd, SdeKind::Cir] {
            let model = SdeModel::new(kind, vec![KeywordDynamics { mu: 0.05, sigma: 2.5, k: 0.5 }; 2]).unwrap();
            let ps = simulate_path(&[0.2, 0.1], &model, &CorrMatrix::pair(0.5).unwrap(), 1.0, 100, DriftMode::RealWorld, 200, 5).unwrap();
            assert!(!ps.has_negative(), "{kind}");
        }
    }

    #[test]
    fn seed_determinism_across_thread_counts() {
        let corr = CorrMatrix::pair(-0.4).unwrap();
        let model = SdeModel::new(SdeKind::Cev, vec![KeywordDynamics { mu: 0.1, sigma: 0.3, k: 0.0 }; 2]).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_path(&[1.0, 2.0], &model, &corr, 0.5, 20, DriftMode::RealWorld, 500, 42).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn unknown_model_name() {
        assert!("vasicek".parse::<SdeKind>().is_err());
        assert_eq!("CIR".parse::<SdeKind>().unwrap(), SdeKind::Cir);
    }
}
