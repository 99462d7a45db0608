use std::io::Write;

use super::autocorr::{acf, default_lags, ljung_box};
use super::rank::rank_tests;
use super::shapiro::shapiro_wilk;
use crate::error::{Error, Result};

/// GBM validation of one keyword's log returns: normality (Shapiro-Wilk) and
/// independence (Ljung-Box, ACF).
#[derive(Debug, Clone, PartialEq)]
pub struct GofReport {
    pub keyword: String,
    pub shapiro_wilk_p: f64,
    pub ljung_box_p: f64,
    pub lags: usize,
    pub acf: Vec<f64>,
    pub alpha: f64,
    /// Both p-values exceed `alpha`.
    pub gbm_ok: bool,
    /// The returns were constant, so neither test is meaningful.
    pub degenerate: bool,
}

pub fn gof_report(keyword: &str, returns: &[f64], alpha: f64, lags: Option<usize>) -> Result<GofReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("significance level {alpha} outside (0, 1)")));
    }
    let lags = lags.unwrap_or_else(|| default_lags(returns.len()));
    let sw = shapiro_wilk(returns)?;
    let lb = ljung_box(returns, lags)?;
    let degenerate = sw.degenerate;
    let ljung_box_p = if degenerate { 0.0 } else { lb.p_value };
    Ok(GofReport {
        keyword: keyword.to_string(),
        shapiro_wilk_p: sw.p_value,
        ljung_box_p,
        lags,
        acf: acf(returns, lags)?,
        alpha,
        gbm_ok: !degenerate && sw.p_value > alpha && ljung_box_p > alpha,
        degenerate,
    })
}

/// `keyword,sw_p,lb_p,gbm_ok`
pub fn write_gof_csv<W: Write>(reports: &[GofReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["keyword", "sw_p", "lb_p", "gbm_ok"])?;
    for r in reports {
        w.write_record([
            r.keyword.clone(),
            r.shapiro_wilk_p.to_string(),
            r.ljung_box_p.to_string(),
            r.gbm_ok.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("gof report", e))?;
    Ok(())
}

/// How often simulated paths of a model are statistically indistinguishable
/// from the observed series.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub keyword: String,
    pub model: String,
    pub n_simulations: usize,
    pub alpha: f64,
    pub wilcoxon_p: f64,
    pub ansari_bradley_p: f64,
    pub ks_p: f64,
    pub wilcoxon_not_rejected: f64,
    pub ansari_bradley_not_rejected: f64,
    pub ks_not_rejected: f64,
}

/// Runs the three rank tests of every simulated path against `actual`.
/// The `*_p` fields are mean p-values over simulations; the
/// `*_not_rejected` fields are the fraction of simulations with `p > alpha`.
pub fn similarity_report(
    keyword: &str,
    model: &str,
    actual: &[f64],
    simulated: &[Vec<f64>],
    alpha: f64,
) -> Result<SimilarityReport> {
    if simulated.is_empty() {
        return Err(Error::invalid("no simulated paths"));
    }
    let mut p = [0.0f64; 3];
    let mut kept = [0usize; 3];
    for sim in simulated {
        let t = rank_tests(actual, sim)?;
        for (k, pv) in [t.wilcoxon.p_value, t.ansari_bradley.p_value, t.ks.p_value].into_iter().enumerate() {
            p[k] += pv;
            if pv > alpha {
                kept[k] += 1;
            }
        }
    }
    let n = simulated.len() as f64;
    Ok(SimilarityReport {
        keyword: keyword.to_string(),
        model: model.to_string(),
        n_simulations: simulated.len(),
        alpha,
        wilcoxon_p: p[0] / n,
        ansari_bradley_p: p[1] / n,
        ks_p: p[2] / n,
        wilcoxon_not_rejected: kept[0] as f64 / n,
        ansari_bradley_not_rejected: kept[1] as f64 / n,
        ks_not_rejected: kept[2] as f64 / n,
    })
}

/// `keyword,model,test,frac_not_rejected`
pub fn write_similarity_csv<W: Write>(reports: &[SimilarityReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["keyword", "model", "test", "frac_not_rejected"])?;
    for r in reports {
        for (test, frac) in [
            ("wilcoxon", r.wilcoxon_not_rejected),
            ("ansari_bradley", r.ansari_bradley_not_rejected),
            ("ks", r.ks_not_rejected),
        ] {
            w.write_record([r.keyword.as_str(), r.model.as_str(), test, &frac.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("similarity report", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_returns_are_degenerate() {
        let r = gof_report("flat", &[0.0; 30], 0.05, None).unwrap();
        assert!(r.degenerate);
        assert!(!r.gbm_ok);
        assert_eq!(r.acf[0], 1.0);
    }

    #[test]
    fn similarity_of_a_sample_with_itself() {
        let x: Vec<f64> = (0..31).map(|i| (i as f64 * 1.7).sin() + 3.0).collect();
        let rep = similarity_report("k", "gbm", &x, &[x.clone(), x.clone()], 0.05).unwrap();
        assert_eq!(rep.ks_not_rejected, 1.0);
        assert_eq!(rep.wilcoxon_not_rejected, 1.0);
        assert_eq!(rep.n_simulations, 2);
        let mut buf = Vec::new();
        write_similarity_csv(&[rep], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("keyword,model,test,frac_not_rejected\nk,gbm,wilcoxon,1\n"));
    }
}
