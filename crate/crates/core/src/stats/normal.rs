use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF, `0.5 * erfc(-x / sqrt(2))`, accurate to a few ulps
/// across the whole real line.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`std_normal_cdf`] for `p` in `(0, 1)`.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    #[test]
    fn center_and_symmetry() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        for &x in &[0.1, 0.7, 1.3, 2.9, 5.5, 8.0, 12.0] {
            assert!((std_normal_cdf(x) - (1.0 - std_normal_cdf(-x))).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_integrated_density() {
        // Oracle: 0.5 + integral of the density from 0 to x.
        for &x in &[0.25, 1.0, 1.959964, 3.0, -2.2] {
            let area = integrate(std_normal_pdf, 0.0, x, 1e-15).unwrap().value;
            assert!((std_normal_cdf(x) - (0.5 + area)).abs() < 1e-13, "x={x}");
        }
        assert!((std_normal_cdf(1.959964) - 0.975).abs() < 1e-6);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 0.001, 0.025, 0.3, 0.5, 0.8, 0.975, 0.999999] {
            let x = std_normal_quantile(p);
            assert!((std_normal_cdf(x) - p).abs() < 1e-12 * p.max(1e-3), "p={p}");
        }
    }
}
