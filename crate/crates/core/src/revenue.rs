//! The seller's expected revenue difference `D(F)` between selling a click
//! through an option and selling it at auction.
//!
//! The auction revenue of a keyword is valued at its risk-neutral expected
//! spot CPC `E_i = C_i(0) e^{rT}`. For one keyword this gives
//! `D(F) = pi - e^{-rT} (E - F) N(zeta_2)`, positive for every `F > 0` and
//! maximal at `F = E`. For `n` keywords the option holder exercises the
//! keyword with the largest payoff; the seller then receives its fixed CPC
//! instead of its expected auction CPC, so
//! `D = pi + e^{-rT} E[(F_j - E_j) 1{exercise of j}]`.

use std::io::Write;

use rayon::prelude::*;

use crate::calibration::CorrMatrix;
use crate::error::{Error, Result};
use crate::pricing::{check_paths, mc_estimate, MatchType, OptionSpec};
use crate::stats::std_normal_cdf;

/// Largest number of grid points accepted by [`revenue_surface`].
pub const MAX_GRID_POINTS: usize = 10_000;

/// Risk-neutral expected CPC `C(0) e^{rT}` at the horizon.
pub fn expected_spot(c0: f64, r: f64, t: f64) -> f64 {
    c0 * (r * t).exp()
}

/// Exercise probability `N(zeta_2)` and the revenue-section `zeta_1`,
/// `zeta_2` (with `(r + sigma^2/2) T` and `(r - sigma^2/2) T` respectively).
pub fn revenue_zetas(c0: f64, sigma: f64, r: f64, t: f64, f: f64) -> (f64, f64) {
    let s = sigma * t.sqrt();
    let z1 = ((c0 / f).ln() + (r + 0.5 * sigma * sigma) * t) / s;
    let z2 = ((c0 / f).ln() + (r - 0.5 * sigma * sigma) * t) / s;
    (z1, z2)
}

/// One-keyword closed form, per click. With `sigma = 0` the option and the
/// auction earn the same and the difference is exactly zero.
pub fn revenue_diff_1d(c0: f64, sigma: f64, r: f64, t: f64, f: f64) -> Result<f64> {
    if !(c0 > 0.0 && c0.is_finite()) || !(f > 0.0 && f.is_finite()) {
        return Err(Error::invalid(format!("C(0) = {c0} and F = {f} must be > 0")));
    }
    if !(t > 0.0 && t.is_finite()) || !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("need T > 0 and sigma >= 0, got T = {t}, sigma = {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    // pi - e^{-rT} (E - F) N(z2) collapses to C(0) (N(z1) - N(z2)); the
    // upper-tail form avoids cancellation deep in the money.
    let (z1, z2) = revenue_zetas(c0, sigma, r, t, f);
    let mass = if z2 > 0.0 {
        std_normal_cdf(-z2) - std_normal_cdf(-z1)
    } else {
        std_normal_cdf(z1) - std_normal_cdf(z2)
    };
    Ok(c0 * mass.max(0.0))
}

/// A revenue difference at one fixed-CPC vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RevenuePoint {
    pub fixed_cpc: Vec<f64>,
    /// Per-click revenue difference.
    pub d: f64,
    pub std_error: f64,
    /// The point lies on the edge of the grid.
    pub boundary: bool,
}

fn require_exact(spec: &OptionSpec) -> Result<()> {
    if *spec.matching() != MatchType::Exact {
        return Err(Error::invalid("revenue analysis supports exact match only"));
    }
    Ok(())
}

/// Terminal samples shared by every grid point of a surface.
struct SharedSamples {
    values: Vec<f64>,
    n: usize,
    expected: Vec<f64>,
    disc: f64,
}

impl SharedSamples {
    fn new(spec: &OptionSpec, c0: &[f64], sigma: &[f64], corr: &CorrMatrix, n_paths: usize, seed: u64) -> Result<Self> {
        check_paths(n_paths)?;
        let sampler = spec.sampler(c0, sigma, corr, spec.maturity())?;
        let n = c0.len();
        // Chunked like the pricers; path p always reads stream p of `seed`.
        let values: Vec<f64> = (0..n_paths.div_ceil(4096))
            .into_par_iter()
            .flat_map_iter(|chunk| {
                let lo = chunk * 4096;
                let hi = (lo + 4096).min(n_paths);
                let mut scratch = vec![0.0; 2 * n];
                let mut out = vec![0.0; (hi - lo) * n];
                for (i, p) in (lo..hi).enumerate() {
                    sampler.sample_into(seed, p, &mut scratch, &mut out[i * n..(i + 1) * n]);
                }
                out
            })
            .collect();
        Ok(Self {
            values,
            n,
            expected: c0.iter().map(|c| expected_spot(*c, spec.rate(), spec.maturity())).collect(),
            disc: (-spec.rate() * spec.maturity()).exp(),
        })
    }

    /// Mean and standard error of `e^{-rT} (C_j(T) - E_j) 1{exercise of j}`.
    fn evaluate(&self, spec: &OptionSpec) -> (f64, f64) {
        let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
        for c in self.values.chunks(self.n) {
            let x = match spec.payoff_choice(c) {
                (_, Some(j)) => self.disc * (c[j] - self.expected[j]),
                (_, None) => 0.0,
            };
            n += 1.0;
            let d = x - mean;
            mean += d / n;
            m2 += d * (x - mean);
        }
        (mean, (m2 / (n - 1.0) / n).sqrt())
    }
}

/// Monte Carlo revenue difference per click at the fixed CPCs of `spec`.
pub fn revenue_diff_mc(
    spec: &OptionSpec,
    c0: &[f64],
    sigma: &[f64],
    corr: &CorrMatrix,
    n_paths: usize,
    seed: u64,
) -> Result<RevenuePoint> {
    require_exact(spec)?;
    check_paths(n_paths)?;
    let sampler = spec.sampler(c0, sigma, corr, spec.maturity())?;
    let expected: Vec<f64> = c0.iter().map(|c| expected_spot(*c, spec.rate(), spec.maturity())).collect();
    let disc = (-spec.rate() * spec.maturity()).exp();
    let est = mc_estimate(&sampler, seed, n_paths, 1, |c, out| {
        out[0] = match spec.payoff_choice(c) {
            (_, Some(j)) => disc * (c[j] - expected[j]),
            (_, None) => 0.0,
        };
    });
    Ok(RevenuePoint {
        fixed_cpc: spec.fixed_cpc().to_vec(),
        d: est[0].0,
        std_error: est[0].1,
        boundary: false,
    })
}

/// Cartesian grid of fixed CPCs, one axis per keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct RevenueGrid {
    axes: Vec<Vec<f64>>,
}

impl RevenueGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(Vec::is_empty) {
            return Err(Error::invalid("every grid axis needs at least one point"));
        }
        if let Some(f) = axes.iter().flatten().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::invalid(format!("grid value {f} must be > 0")));
        }
        let size = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
        match size {
            Some(s) if s <= MAX_GRID_POINTS => Ok(Self { axes }),
            _ => Err(Error::invalid(format!("grid exceeds {MAX_GRID_POINTS} points"))),
        }
    }

    /// `points` evenly spaced values from `lo` to `hi` on every axis.
    pub fn uniform(bounds: &[(f64, f64)], points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::invalid("grid needs at least one point per axis"));
        }
        Self::new(
            bounds
                .iter()
                .map(|&(lo, hi)| {
                    if points == 1 {
                        vec![lo]
                    } else {
                        (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
                    }
                })
                .collect(),
        )
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order (last axis fastest), with boundary flags.
    fn points(&self) -> Vec<(Vec<f64>, bool)> {
        let mut out = Vec::with_capacity(self.len());
        let mut idx = vec![0usize; self.axes.len()];
        for _ in 0..self.len() {
            let f = idx.iter().zip(&self.axes).map(|(&i, a)| a[i]).collect();
            let boundary = idx.iter().zip(&self.axes).any(|(&i, a)| a.len() > 1 && (i == 0 || i + 1 == a.len()));
            out.push((f, boundary));
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < self.axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RevenueMethod {
    /// One-keyword closed form.
    ClosedForm,
    /// Shared Monte Carlo samples for every grid point.
    MonteCarlo { n_paths: usize, seed: u64 },
}

/// Revenue differences over a grid, its maximizer, and the value at the
/// reference point `F_i = C_i(0) e^{rT}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RevenueCurve {
    pub points: Vec<RevenuePoint>,
    pub optimum: usize,
    pub reference: RevenuePoint,
}

impl RevenueCurve {
    pub fn optimum_point(&self) -> &RevenuePoint {
        &self.points[self.optimum]
    }
}

/// Evaluates the revenue difference over `grid`. The fixed CPCs of `spec`
/// are replaced by each grid point.
pub fn revenue_surface(
    spec: &OptionSpec,
    c0: &[f64],
    sigma: &[f64],
    corr: &CorrMatrix,
    grid: &RevenueGrid,
    method: RevenueMethod,
) -> Result<RevenueCurve> {
    require_exact(spec)?;
    if grid.axes.len() != spec.n() {
        return Err(Error::DimensionMismatch {
            what: "grid axes",
            expected: spec.n(),
            actual: grid.axes.len(),
        });
    }
    let reference_f: Vec<f64> = c0.iter().map(|c| expected_spot(*c, spec.rate(), spec.maturity())).collect();
    let mut targets = grid.points();
    targets.push((reference_f, false));
    let evaluated: Vec<RevenuePoint> = match method {
        RevenueMethod::ClosedForm => {
            if spec.n() != 1 || sigma.len() != 1 || c0.len() != 1 {
                return Err(Error::invalid("the closed-form revenue curve needs one keyword"));
            }
            targets
                .into_iter()
                .map(|(f, boundary)| {
                    Ok(RevenuePoint {
                        d: revenue_diff_1d(c0[0], sigma[0], spec.rate(), spec.maturity(), f[0])?,
                        fixed_cpc: f,
                        std_error: 0.0,
                        boundary,
                    })
                })
                .collect::<Result<_>>()?
        }
        RevenueMethod::MonteCarlo { n_paths, seed } => {
            let samples = SharedSamples::new(spec, c0, sigma, corr, n_paths, seed)?;
            targets
                .into_par_iter()
                .map(|(f, boundary)| {
                    let (d, std_error) = samples.evaluate(&spec.with_fixed_cpc(f.clone())?);
                    Ok(RevenuePoint {
                        fixed_cpc: f,
                        d,
                        std_error,
                        boundary,
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    let mut points = evaluated;
    let reference = points.pop().expect("reference point was appended");
    let optimum = points
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if p.d > points[best].d { i } else { best });
    Ok(RevenueCurve {
        points,
        optimum,
        reference,
    })
}

/// `F_1,...,F_n,D,stderr`
pub fn write_surface_csv<W: Write>(curve: &RevenueCurve, out: W) -> Result<()> {
    let n = curve.reference.fixed_cpc.len();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=n).map(|i| format!("F_{i}")).collect();
    header.extend(["D".to_string(), "stderr".to_string()]);
    w.write_record(&header)?;
    for p in &curve.points {
        let mut row: Vec<String> = p.fixed_cpc.iter().map(f64::to_string).collect();
        row.extend([p.d.to_string(), p.std_error.to_string()]);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("revenue surface", e))?;
    Ok(())
}

/// `point,F_1,...,F_n,D,stderr,boundary` with rows `argmax` and `reference`.
pub fn write_summary_csv<W: Write>(curve: &RevenueCurve, out: W) -> Result<()> {
    let n = curve.reference.fixed_cpc.len();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["point".to_string()];
    header.extend((1..=n).map(|i| format!("F_{i}")));
    header.extend(["D".to_string(), "stderr".to_string(), "boundary".to_string()]);
    w.write_record(&header)?;
    for (label, p) in [("argmax", curve.optimum_point()), ("reference", &curve.reference)] {
        let mut row = vec![label.to_string()];
        row.extend(p.fixed_cpc.iter().map(f64::to_string));
        row.extend([p.d.to_string(), p.std_error.to_string(), p.boundary.to_string()]);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("revenue summary", e))?;
    Ok(())
}
