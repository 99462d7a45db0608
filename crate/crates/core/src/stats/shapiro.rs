//! Shapiro-Wilk W test with Royston's (1995, AS R94) coefficient and p-value
//! approximations.

use super::normal::{std_normal_cdf, std_normal_quantile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p_value: f64,
    /// Constant sample: W is undefined and `p_value` is 0 by convention.
    pub degenerate: bool,
}

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Half of the antisymmetric coefficient vector: `a[i]` weights
/// `x(n - i) - x(i + 1)` for `i < n / 2`.
fn coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    let an = n as f64;
    let m: Vec<f64> = (1..=half)
        .map(|i| std_normal_quantile((i as f64 - 0.375) / (an + 0.25)))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    for i in first..half {
        a[i] = -m[i] / fac;
    }
    a
}

/// Shapiro-Wilk normality test for `8 <= n <= 5000`.
pub fn shapiro_wilk(sample: &[f64]) -> Result<ShapiroWilk> {
    let n = sample.len();
    if !(8..=5000).contains(&n) {
        return Err(Error::invalid(format!(
            "Shapiro-Wilk needs 8 <= n <= 5000, got n = {n}"
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sample contains non-finite values"));
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    if x[n - 1] - x[0] == 0.0 {
        return Ok(ShapiroWilk {
            w: f64::NAN,
            p_value: 0.0,
            degenerate: true,
        });
    }

    let a = coefficients(n);
    let mean = x.iter().sum::<f64>() / n as f64;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let num: f64 = a.iter().enumerate().map(|(i, ai)| ai * (x[n - 1 - i] - x[i])).sum();
    let w = (num * num / ss).min(1.0);

    let w1 = (1.0 - w).ln();
    let an = n as f64;
    let (y, mean_y, sd_y) = if n <= 11 {
        let gamma = poly(&G, an);
        if w1 >= gamma {
            return Ok(ShapiroWilk {
                w,
                p_value: 1e-99,
                degenerate: false,
            });
        }
        (-(gamma - w1).ln(), poly(&C3, an), poly(&C4, an).exp())
    } else {
        let ln_n = an.ln();
        (w1, poly(&C5, ln_n), poly(&C6, ln_n).exp())
    };
    let p_value = 1.0 - std_normal_cdf((y - mean_y) / sd_y);
    Ok(ShapiroWilk {
        w,
        p_value: p_value.clamp(0.0, 1.0),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_have_unit_norm() {
        for n in [8usize, 9, 20, 31, 100, 1000] {
            let a = coefficients(n);
            let norm: f64 = 2.0 * a.iter().map(|v| v * v).sum::<f64>();
            assert!((norm - 1.0).abs() < 1e-10, "n={n}");
            assert!(a.windows(2).all(|p| p[0] > p[1]));
        }
    }

    #[test]
    fn reference_values() {
        // Reference values from scipy.stats.shapiro (same AS R94 algorithm).
        let x: Vec<f64> = (1..=20).map(f64::from).collect();
        let r = shapiro_wilk(&x).unwrap();
        assert!((r.w - 0.960_375_183).abs() < 1e-6, "w={}", r.w);
        assert!((r.p_value - 0.551_371_746).abs() < 1e-5, "p={}", r.p_value);
        let x: Vec<f64> = (1..=8).map(f64::from).collect();
        let r = shapiro_wilk(&x).unwrap();
        assert!((r.w - 0.974_858_256).abs() < 1e-6, "w={}", r.w);
        assert!((r.p_value - 0.933_165_192).abs() < 1e-5, "p={}", r.p_value);
    }

    #[test]
    fn skewed_sample_rejected() {
        let x: Vec<f64> = (1..=40).map(|i| (i as f64 * 0.25).exp()).collect();
        assert!(shapiro_wilk(&x).unwrap().p_value < 1e-4);
    }

    #[test]
    fn constant_and_size_limits() {
        let r = shapiro_wilk(&[2.0; 12]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 0.0);
        assert!(shapiro_wilk(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).is_err());
        assert!(shapiro_wilk(&vec![0.5; 5001]).is_err());
    }
}
