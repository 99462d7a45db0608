use ad_options::calibration::{check_psd, estimate_corr, CorrMatrix};
use ad_options::cli::RunConfig;
use ad_options::hedging::{classify_arbitrage, delta_closed, Verdict};
use ad_options::market_data::LogReturnSeries;
use ad_options::pricing::{price_bsm_closed, price_dual_strike_closed, price_mc, OptionSpec};
use ad_options::revenue::revenue_diff_1d;
use ad_options::sde::{simulate_path, DriftMode, SdeModel};
use ad_options::stats::{gof_report, rank_tests};
use ad_options::DAY;
use chrono::{Duration, NaiveDate};
use nalgebra::DMatrix;
use proptest::prelude::*;

const PATHS: usize = 2000;

fn spec(f: &[f64], clicks: f64, days: f64) -> OptionSpec {
    let names = (0..f.len()).map(|i| format!("k{i}")).collect();
    OptionSpec::new(names, f.to_vec(), clicks, days * DAY, 0.05).unwrap()
}

fn corr3(a: f64, b: f64, c: f64) -> CorrMatrix {
    let raw = CorrMatrix::new(DMatrix::from_row_slice(3, 3, &[1.0, a, b, a, 1.0, c, b, c, 1.0]));
    check_psd(&raw.unwrap()).0
}

fn sample(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn price_is_linear_in_clicks(m in 1u32..500, c0 in 1.0..8.0f64, f in 1.0..8.0f64, sigma in 0.05..0.8f64, seed in any::<u64>()) {
        let s1 = spec(&[f, f * 1.1], 1.0, 31.0);
        let sm = s1.with_clicks(m as f64).unwrap();
        let corr = CorrMatrix::pair(0.3).unwrap();
        let p1 = price_mc(&s1, &[c0, c0], &[sigma, sigma], &corr, PATHS, seed).unwrap();
        let pm = price_mc(&sm, &[c0, c0], &[sigma, sigma], &corr, PATHS, seed).unwrap();
        prop_assert_eq!(pm.per_click, p1.per_click);
        prop_assert_eq!(pm.pi, m as f64 * p1.pi);
        let b1 = price_bsm_closed(&spec(&[f], 1.0, 31.0), c0, sigma).unwrap();
        let bm = price_bsm_closed(&spec(&[f], m as f64, 31.0), c0, sigma).unwrap();
        prop_assert_eq!(bm.pi, m as f64 * b1.pi);
    }

    #[test]
    fn mc_price_is_monotone_in_strikes_and_spots(
        c0 in prop::array::uniform3(1.0..8.0f64),
        f in prop::array::uniform3(1.0..8.0f64),
        sigma in prop::array::uniform3(0.05..0.8f64),
        (a, b, c) in (-0.9..0.9f64, -0.9..0.9f64, -0.9..0.9f64),
        i in 0usize..3,
        bump in 0.01..2.0f64,
        seed in any::<u64>(),
    ) {
        let corr = corr3(a, b, c);
        let base = price_mc(&spec(&f, 1.0, 31.0), &c0, &sigma, &corr, PATHS, seed).unwrap().pi;
        let mut f_up = f;
        f_up[i] += bump;
        let mut c_up = c0;
        c_up[i] += bump;
        let higher_strike = price_mc(&spec(&f_up, 1.0, 31.0), &c0, &sigma, &corr, PATHS, seed).unwrap().pi;
        let higher_spot = price_mc(&spec(&f, 1.0, 31.0), &c_up, &sigma, &corr, PATHS, seed).unwrap().pi;
        // Path by path the payoff is monotone; allow only reduction-order rounding.
        let slack = 1e-12 * base.abs();
        prop_assert!(higher_strike <= base + slack);
        prop_assert!(higher_spot >= base - slack);
    }

    #[test]
    fn adding_a_keyword_never_lowers_the_price(
        c0 in prop::array::uniform2(1.0..8.0f64),
        f in prop::array::uniform2(1.0..8.0f64),
        sigma in prop::array::uniform2(0.05..0.8f64),
        rho in -0.95..0.95f64,
        days in 1.0..120.0f64,
    ) {
        let single = price_bsm_closed(&spec(&f[..1], 1.0, days), c0[0], sigma[0]).unwrap().pi;
        let dual = price_dual_strike_closed(&spec(&f, 1.0, days), &c0, &sigma, rho).unwrap().pi;
        prop_assert!(dual >= single - 1e-10, "single {} dual {}", single, dual);
    }

    #[test]
    fn closed_form_respects_no_arbitrage_bounds(c0 in 0.1..10.0f64, f in 0.1..10.0f64, sigma in 0.01..1.5f64, days in 1.0..365.0f64) {
        let s = spec(&[f], 1.0, days);
        let pi = price_bsm_closed(&s, c0, sigma).unwrap().pi;
        let intrinsic = (c0 - (-0.05 * days * DAY).exp() * f).max(0.0);
        prop_assert!(pi >= intrinsic - 1e-12 && pi <= c0 + 1e-12);
        let delta = delta_closed(&s, c0, sigma).unwrap().delta[0];
        prop_assert!((0.0..=1.0).contains(&delta));
    }

    #[test]
    fn revenue_difference_is_nonnegative_and_bounded_by_spot(c0 in 0.1..10.0f64, f in 0.01..30.0f64, sigma in 0.0..1.5f64, days in 1.0..365.0f64) {
        let d = revenue_diff_1d(c0, sigma, 0.05, days * DAY, f).unwrap();
        prop_assert!(d.is_finite() && d >= 0.0 && d <= c0);
    }

    #[test]
    fn classifier_follows_the_sign_of_alpha(gamma in -1.0..1.0f64, r in 0.0..0.05f64, eps in 0.0..0.2f64) {
        let (alpha, verdict) = classify_arbitrage(gamma, r, eps);
        match verdict {
            Verdict::BuySideArbitrage => prop_assert!(alpha > 0.0 && gamma > r + eps),
            Verdict::SellSideArbitrage => prop_assert!(alpha < 0.0 && gamma < r - eps),
            Verdict::NoArbitrage => prop_assert!(alpha == 0.0 && (gamma - r).abs() <= eps),
            Verdict::Degenerate => prop_assert!(false, "finite inputs are never degenerate"),
        }
    }

    #[test]
    fn p_values_are_probabilities(a in sample(40), b in sample(30)) {
        let t = rank_tests(&a, &b).unwrap();
        for p in [t.wilcoxon.p_value, t.ansari_bradley.p_value, t.ks.p_value] {
            prop_assert!((0.0..=1.0).contains(&p));
        }
        let g = gof_report("x", &a, 0.05, None).unwrap();
        prop_assert!((0.0..=1.0).contains(&g.shapiro_wilk_p));
        prop_assert!((0.0..=1.0).contains(&g.ljung_box_p));
    }

    #[test]
    fn rank_tests_ignore_strictly_increasing_transforms(a in sample(25), b in sample(25)) {
        let g = |v: &Vec<f64>| v.iter().map(|x| x.exp()).collect::<Vec<_>>();
        prop_assert_eq!(rank_tests(&a, &b).unwrap(), rank_tests(&g(&a), &g(&b)).unwrap());
    }

    #[test]
    fn estimated_correlation_is_a_valid_matrix(rows in prop::collection::vec(prop::array::uniform4(-0.1..0.1f64), 12..40)) {
        let start = NaiveDate::from_ymd_opt(2012, 1, 1).unwrap();
        let series: Vec<LogReturnSeries> = (0..4)
            .map(|k| {
                let r = rows.iter().enumerate().map(|(d, row)| (start + Duration::days(d as i64), row[k])).collect();
                LogReturnSeries::new(format!("k{k}"), r)
            })
            .collect();
        let corr = estimate_corr(&series).unwrap().corr;
        for i in 0..4 {
            prop_assert_eq!(corr.get(i, i), 1.0);
            for j in 0..4 {
                prop_assert_eq!(corr.get(i, j), corr.get(j, i));
            }
        }
        prop_assert!(corr.min_eigenvalue() > -1e-9);
        let (again, repaired) = check_psd(&corr);
        prop_assert!(!repaired);
        prop_assert_eq!(again, corr);
    }

    #[test]
    fn gbm_paths_stay_positive_and_start_at_c0(c0 in prop::array::uniform2(0.1..10.0f64), sigma in prop::array::uniform2(0.0..2.0f64), seed in any::<u64>()) {
        let model = SdeModel::gbm(&[0.05, -0.2], &sigma).unwrap();
        let paths = simulate_path(&c0, &model, &CorrMatrix::pair(0.5).unwrap(), 31.0 * DAY, 31, DriftMode::RealWorld, 8, seed).unwrap();
        for p in 0..8 {
            prop_assert_eq!(paths.get(p, 0), &c0[..]);
            for s in 0..=31 {
                prop_assert!(paths.get(p, s).iter().all(|c| *c > 0.0));
            }
        }
    }

    #[test]
    fn config_canonical_form_round_trips(seed in any::<u64>(), m in 1u32..1000, f in prop::collection::vec(0.1..9.0f64, 1..4)) {
        let f_text: Vec<String> = f.iter().map(|x| x.to_string()).collect();
        let cfg = RunConfig::parse(&format!("seed = {seed}\nm = {m}\nF = {}\n", f_text.join(", "))).unwrap();
        let again = RunConfig::parse(&cfg.canonical()).unwrap();
        prop_assert_eq!(again.canonical(), cfg.canonical());
        prop_assert_eq!(again.floats("F").unwrap().unwrap(), f);
    }
}
