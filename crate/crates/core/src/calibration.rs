//! GBM parameter estimation from daily log returns.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::market_data::{LogReturnSeries, MIN_WINDOW_OBSERVATIONS};
use crate::{DAY, DAYS_PER_YEAR};

/// Eigenvalues above this are treated as non-negative by [`check_psd`].
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Per-keyword drift (per year) and volatility (per square-root year).
#[derive(Debug, Clone, PartialEq)]
pub struct GbmParams {
    pub keyword: String,
    pub mu: f64,
    pub sigma: f64,
}

impl GbmParams {
    pub fn new(keyword: impl Into<String>, mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::invalid(format!(
                "invalid GBM parameters mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Self {
            keyword: keyword.into(),
            mu,
            sigma,
        })
    }

    /// Zero volatility: the keyword's CPC never moved in the window.
    pub fn is_flat(&self) -> bool {
        self.sigma == 0.0
    }
}

/// Symmetric, unit-diagonal correlation matrix with entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix {
    rho: DMatrix<f64>,
}

impl CorrMatrix {
    /// Validates symmetry, unit diagonal and the entry range. Positive
    /// semidefiniteness is not checked here; see [`check_psd`].
    pub fn new(rho: DMatrix<f64>) -> Result<Self> {
        let n = rho.nrows();
        if n == 0 || rho.ncols() != n {
            return Err(Error::invalid("correlation matrix must be square and non-empty"));
        }
        for i in 0..n {
            if (rho[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("diagonal entry {i} is {} (must be 1)", rho[(i, i)])));
            }
            for j in 0..n {
                let v = rho[(i, j)];
                if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
                    return Err(Error::invalid(format!("entry ({i},{j}) = {v} outside [-1, 1]")));
                }
                if (v - rho[(j, i)]).abs() > 1e-12 {
                    return Err(Error::invalid(format!("entry ({i},{j}) is not symmetric")));
                }
            }
        }
        Ok(Self { rho })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("correlation rows must form a square matrix"));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rho: DMatrix::identity(n, n),
        }
    }

    /// Two-keyword matrix with off-diagonal `rho`.
    pub fn pair(rho: f64) -> Result<Self> {
        Self::from_rows(&[vec![1.0, rho], vec![rho, 1.0]])
    }

    /// All off-diagonal entries equal to `rho`.
    pub fn uniform(n: usize, rho: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho }))
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rho[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rho
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.rho.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Sub-matrix over the given keyword indices.
    pub fn select(&self, idx: &[usize]) -> CorrMatrix {
        CorrMatrix {
            rho: DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.rho[(idx[i], idx[j])]),
        }
    }

    /// Square CSV with the keyword ids as header row and first column.
    pub fn write_csv<W: Write>(&self, keywords: &[String], out: W) -> Result<()> {
        if keywords.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "correlation keyword labels",
                expected: self.dim(),
                actual: keywords.len(),
            });
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::from("keyword")];
        header.extend(keywords.iter().cloned());
        w.write_record(&header)?;
        for (i, k) in keywords.iter().enumerate() {
            let mut row = vec![k.clone()];
            row.extend((0..self.dim()).map(|j| self.rho[(i, j)].to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("correlation report", e))?;
        Ok(())
    }
}

/// Volatility and drift of one keyword from its daily log returns.
///
/// `sigma` is the sample standard deviation (n - 1 denominator) annualized by
/// `sqrt(365)`. `mu` inverts the GBM log-return mean, `mean / dt + sigma^2 / 2`.
/// A zero-variance series yields `sigma = 0`, which callers can detect with
/// [`GbmParams::is_flat`].
pub fn estimate_sigma(returns: &LogReturnSeries) -> Result<GbmParams> {
    let y = returns.values();
    if y.len() < MIN_WINDOW_OBSERVATIONS {
        return Err(Error::TooFewObservations {
            required: MIN_WINDOW_OBSERVATIONS,
            actual: y.len(),
        });
    }
    let (mean, var) = mean_and_variance(&y);
    let sigma = (var * DAYS_PER_YEAR).sqrt();
    let mu = if sigma == 0.0 { mean / DAY } else { mean / DAY + 0.5 * sigma * sigma };
    GbmParams::new(returns.keyword(), mu, sigma)
}

/// Sample mean and unbiased sample variance. Returns a variance of exactly zero
/// when all values are equal.
pub(crate) fn mean_and_variance(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    if y.iter().all(|&v| v == y[0]) {
        return (y[0], 0.0);
    }
    let ss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, ss / (n - 1.0))
}

/// Outcome of [`estimate_corr`]: the (possibly repaired) matrix and whether
/// repair was needed.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrEstimate {
    pub corr: CorrMatrix,
    pub repaired: bool,
}

/// Pairwise Pearson correlation of aligned return series, followed by the
/// positive-semidefinite repair of [`check_psd`].
pub fn estimate_corr(returns: &[LogReturnSeries]) -> Result<CorrEstimate> {
    let first = returns
        .first()
        .ok_or_else(|| Error::invalid("at least one return series is required"))?;
    if first.len() < MIN_WINDOW_OBSERVATIONS {
        return Err(Error::TooFewObservations {
            required: MIN_WINDOW_OBSERVATIONS,
            actual: first.len(),
        });
    }
    let dates = first.dates();
    for s in returns {
        if s.dates() != dates {
            return Err(Error::MisalignedDates);
        }
    }

    let centered: Vec<Vec<f64>> = returns
        .iter()
        .map(|s| {
            let y = s.values();
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            y.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    for (s, norm) in returns.iter().zip(&norms) {
        if *norm == 0.0 || s.values().iter().all(|&v| v == s.values()[0]) {
            return Err(Error::ZeroVariance(s.keyword().to_string()));
        }
    }

    let n = returns.len();
    let rho = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 1.0;
        }
        let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
        (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
    });
    // from_fn evaluates (i, j) and (j, i) independently; force exact symmetry.
    let rho = DMatrix::from_fn(n, n, |i, j| if i <= j { rho[(i, j)] } else { rho[(j, i)] });
    let (corr, repaired) = check_psd(&CorrMatrix::new(rho)?);
    Ok(CorrEstimate { corr, repaired })
}

/// Passes a PSD matrix through unchanged; otherwise clips negative eigenvalues
/// to zero, reconstructs, and rescales back to a unit diagonal. The flag is
/// true when repair happened.
pub fn check_psd(corr: &CorrMatrix) -> (CorrMatrix, bool) {
    let eig = SymmetricEigen::new(corr.rho.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= -PSD_TOLERANCE {
        return (corr.clone(), false);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let q = &eig.eigenvectors;
    let a = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    let n = a.nrows();
    let scale: Vec<f64> = (0..n).map(|i| a[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
    let rho = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            let (lo, hi) = (i.min(j), i.max(j));
            (a[(lo, hi)] / (scale[lo] * scale[hi])).clamp(-1.0, 1.0)
        }
    });
    (CorrMatrix { rho }, true)
}

/// Writes `keyword,mu,sigma` rows.
pub fn write_params_csv<W: Write>(params: &[GbmParams], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["keyword", "mu", "sigma"])?;
    for p in params {
        w.write_record([p.keyword.clone(), p.mu.to_string(), p.sigma.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("calibration report", e))?;
    Ok(())
}
