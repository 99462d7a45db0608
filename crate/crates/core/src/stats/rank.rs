//! Two-sample location, scale and distribution tests, all with large-sample
//! approximations and two-sided p-values.

use super::normal::std_normal_cdf;
use crate::error::{Error, Result};

const MIN_SAMPLE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSampleTest {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTests {
    pub wilcoxon: TwoSampleTest,
    pub ansari_bradley: TwoSampleTest,
    pub ks: TwoSampleTest,
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < MIN_SAMPLE || b.len() < MIN_SAMPLE {
        return Err(Error::TooFewObservations {
            required: MIN_SAMPLE,
            actual: a.len().min(b.len()),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples contain non-finite values"));
    }
    let first = a[0];
    if a.iter().chain(b).all(|&v| v == first) {
        return Err(Error::Degenerate("all observations are tied".into()));
    }
    Ok(())
}

/// Mid-ranks (1-based) of the pooled sample `a ++ b` and the tie-group sizes.
fn pooled_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && pooled[idx[j]] == pooled[idx[i]] {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = mid;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn two_sided(z: f64) -> f64 {
    (2.0 * std_normal_cdf(-z.abs())).min(1.0)
}

/// Wilcoxon rank-sum (Mann-Whitney U) test with tie-corrected variance and a
/// continuity correction. The statistic is `U` of the first sample.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<TwoSampleTest> {
    check_samples(a, b)?;
    let (ranks, ties) = pooled_ranks(a, b);
    let (m, n) = (a.len() as f64, b.len() as f64);
    let total = m + n;
    let u = ranks[..a.len()].iter().sum::<f64>() - m * (m + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = m * n / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if var <= 0.0 {
        return Err(Error::Degenerate("rank-sum variance is zero".into()));
    }
    let diff = u - m * n / 2.0;
    let z = (diff - 0.5 * diff.signum()) / var.sqrt();
    Ok(TwoSampleTest {
        statistic: u,
        p_value: if diff == 0.0 { 1.0 } else { two_sided(z) },
    })
}

/// Ansari-Bradley test for a difference in dispersion. Scores are
/// `min(r, N - r + 1)` on pooled mid-ranks; the statistic is the score sum of
/// the first sample, standardized with the permutation mean and variance
/// (which reduce to the usual closed forms when there are no ties).
pub fn ansari_bradley(a: &[f64], b: &[f64]) -> Result<TwoSampleTest> {
    check_samples(a, b)?;
    let (ranks, _) = pooled_ranks(a, b);
    let total = ranks.len() as f64;
    let scores: Vec<f64> = ranks.iter().map(|&r| r.min(total - r + 1.0)).collect();
    let mean_score = scores.iter().sum::<f64>() / total;
    let spread: f64 = scores.iter().map(|s| (s - mean_score).powi(2)).sum();
    let (m, n) = (a.len() as f64, b.len() as f64);
    let var = m * n / (total * (total - 1.0)) * spread;
    if var <= 0.0 {
        return Err(Error::Degenerate("Ansari-Bradley variance is zero".into()));
    }
    let stat: f64 = scores[..a.len()].iter().sum();
    Ok(TwoSampleTest {
        statistic: stat,
        p_value: two_sided((stat - m * mean_score) / var.sqrt()),
    })
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub(crate) fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // P(K <= x) = sqrt(2 pi)/x * sum exp(-(2k-1)^2 pi^2 / (8 x^2))
        let c = std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x
            * (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum::<f64>();
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let sf = 2.0
            * (1..=100)
                .map(|k| {
                    let kf = k as f64;
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign * (-2.0 * kf * kf * x * x).exp()
                })
                .sum::<f64>();
        sf.clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
/// distribution evaluated at `sqrt(mn / (m + n)) * D`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TwoSampleTest> {
    check_samples(a, b)?;
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (m, n) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < m && j < n {
        let v = x[i].min(y[j]);
        while i < m && x[i] <= v {
            i += 1;
        }
        while j < n && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / m as f64 - j as f64 / n as f64).abs());
    }
    let en = (m * n) as f64 / (m + n) as f64;
    Ok(TwoSampleTest {
        statistic: d,
        p_value: kolmogorov_sf(en.sqrt() * d),
    })
}

/// Runs all three similarity tests on the same pair of samples.
pub fn rank_tests(a: &[f64], b: &[f64]) -> Result<RankTests> {
    Ok(RankTests {
        wilcoxon: wilcoxon_rank_sum(a, b)?,
        ansari_bradley: ansari_bradley(a, b)?,
        ks: ks_two_sample(a, b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_a() -> Vec<f64> {
        (0..25).map(|i| ((i * 37 % 23) as f64 - 11.0) * 0.13 + (i as f64 * 0.7).sin()).collect()
    }

    fn sample_b() -> Vec<f64> {
        (0..30).map(|i| ((i * 29 % 31) as f64 - 14.0) * 0.21 + 0.4).collect()
    }

    #[test]
    fn identical_samples() {
        let a = sample_a();
        let ks = ks_two_sample(&a, &a).unwrap();
        assert_eq!(ks.statistic, 0.0);
        assert_eq!(ks.p_value, 1.0);
        assert_eq!(wilcoxon_rank_sum(&a, &a).unwrap().p_value, 1.0);
    }

    #[test]
    fn reference_values() {
        // scipy: mannwhitneyu(method="asymptotic"), special.kolmogorov(sqrt(mn/(m+n)) D),
        // and the no-ties Ansari-Bradley normal approximation.
        let (a, b) = (sample_a(), sample_b());
        let w = wilcoxon_rank_sum(&a, &b).unwrap();
        assert_eq!(w.statistic, 294.0);
        assert!((w.p_value - 0.173_609_036).abs() < 1e-8);
        let ks = ks_two_sample(&a, &b).unwrap();
        assert!((ks.statistic - 0.3).abs() < 1e-12);
        assert!((ks.p_value - 0.171_695_562).abs() < 1e-8);
        let ab = ansari_bradley(&a, &b).unwrap();
        assert_eq!(ab.statistic, 427.0);
        assert!((ab.p_value - 0.016_997_505).abs() < 1e-8);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        for x in [1.1, 1.15, 1.18, 1.2, 1.25] {
            let c = std::f64::consts::PI.powi(2) / (8.0 * x * x);
            let small = 1.0 - (2.0 * std::f64::consts::PI).sqrt() / x
                * (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum::<f64>();
            let large = 2.0 * (1..=100).map(|k| {
                let kf = k as f64;
                (if k % 2 == 1 { 1.0 } else { -1.0 }) * (-2.0 * kf * kf * x * x).exp()
            }).sum::<f64>();
            assert!((small - large).abs() < 1e-14, "x={x}");
        }
        // scipy.stats.kstwobign.sf(1.358099) = 0.05
        assert!((kolmogorov_sf(1.358_099) - 0.05).abs() < 1e-6);
    }

    #[test]
    fn tied_samples_rejected() {
        assert!(matches!(rank_tests(&[1.0; 10], &[1.0; 12]), Err(Error::Degenerate(_))));
        assert!(rank_tests(&[1.0; 5], &[2.0; 12]).is_err());
    }
}
