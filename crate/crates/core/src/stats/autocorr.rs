use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Sample autocorrelations for lags `0..=max_lag` with the biased (`1/n`)
/// normalization. A constant sample has no defined autocorrelation; its lags
/// beyond zero are reported as 0.
pub fn acf(sample: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = sample.len();
    if n <= max_lag {
        return Err(Error::invalid(format!("acf needs n > max_lag ({n} <= {max_lag})")));
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = sample.iter().map(|v| v - mean).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for k in 1..=max_lag {
        if c0 == 0.0 {
            out.push(0.0);
            continue;
        }
        let ck: f64 = dev[k..].iter().zip(&dev[..n - k]).map(|(a, b)| a * b).sum();
        out.push(ck / c0);
    }
    Ok(out)
}

/// `min(10, n / 5)`, at least one lag.
pub fn default_lags(n: usize) -> usize {
    (n / 5).clamp(1, 10)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LjungBox {
    pub q: f64,
    pub lags: usize,
    pub p_value: f64,
}

/// Ljung-Box portmanteau test against a chi-square with `lags` degrees of
/// freedom.
pub fn ljung_box(sample: &[f64], lags: usize) -> Result<LjungBox> {
    let n = sample.len();
    if lags == 0 || lags >= n {
        return Err(Error::invalid(format!(
            "Ljung-Box needs 1 <= lags < n (lags = {lags}, n = {n})"
        )));
    }
    let r = acf(sample, lags)?;
    let nf = n as f64;
    let q = nf * (nf + 2.0) * (1..=lags).map(|k| r[k] * r[k] / (nf - k as f64)).sum::<f64>();
    let p_value = if q <= 0.0 { 1.0 } else { gamma_ur(lags as f64 / 2.0, q / 2.0) };
    Ok(LjungBox {
        q,
        lags,
        p_value: p_value.clamp(0.0, 1.0),
    })
}
