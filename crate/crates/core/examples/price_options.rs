//! Prices one-, two- and three-keyword ad options with every available
//! method, plus a broad-match contract.

use ad_options::calibration::CorrMatrix;
use ad_options::pricing::{
    check_no_early_exercise, price_bsm_closed, price_dual_strike_closed, price_mc, price_quadrature, BroadWeights,
    MatchType, OptionSpec,
};
use ad_options::{Result, DAY};

fn kw(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn main() -> Result<()> {
    let t = 31.0 * DAY;
    let one = OptionSpec::new(kw(&["hotel"]), vec![3.8505], 100.0, t, 0.05)?;
    println!("one keyword, 100 clicks:");
    println!("  closed form {:.6}", price_bsm_closed(&one, 3.5, 0.3)?.pi);
    println!("  quadrature  {:.6}", price_quadrature(&one, &[3.5], &[0.3], &CorrMatrix::identity(1))?.pi);
    let mc = price_mc(&one, &[3.5], &[0.3], &CorrMatrix::identity(1), 200_000, 1)?;
    println!("  monte carlo {:.6} +- {:.6}", mc.pi, mc.mc_std_error);

    let two = OptionSpec::new(kw(&["hotel", "flight"]), vec![3.8505, 4.6704], 100.0, t, 0.05)?;
    let (c0, sigma) = ([3.5, 4.2], [0.3, 0.25]);
    println!("two keywords, rho = 0.2247:");
    println!("  closed form {:.6}", price_dual_strike_closed(&two, &c0, &sigma, 0.2247)?.pi);
    let mc = price_mc(&two, &c0, &sigma, &CorrMatrix::pair(0.2247)?, 200_000, 1)?;
    println!("  monte carlo {:.6} +- {:.6}", mc.pi, mc.mc_std_error);

    let three = OptionSpec::new(kw(&["hotel", "flight", "car"]), vec![3.8505, 4.6704, 6.2520], 100.0, t, 0.05)?;
    let corr = CorrMatrix::from_rows(&[vec![1.0, 0.2247, 0.1], vec![0.2247, 1.0, 0.3], vec![0.1, 0.3, 1.0]])?;
    let (c0, sigma) = ([3.5, 4.2, 6.0], [0.3, 0.25, 0.4]);
    let mc = price_mc(&three, &c0, &sigma, &corr, 200_000, 1)?;
    println!("three keywords: monte carlo {:.6} +- {:.6}", mc.pi, mc.mc_std_error);
    println!("  quadrature  {:.6}", price_quadrature(&three, &c0, &sigma, &corr)?.pi);

    let check = check_no_early_exercise(&three, &[4.0, 4.5, 6.5], 10.0 * DAY, &sigma, &corr, 100_000, 2)?;
    println!(
        "  at day 10, exercising pays {:.4} while holding is worth {:.4}: hold = {}",
        check.immediate, check.continuation, check.holds
    );

    let weights = BroadWeights::new(vec![vec![0.7, 0.3, 0.0], vec![0.0, 0.5, 0.5]])?;
    let broad = OptionSpec::with_match(kw(&["travel", "transport"]), vec![4.0, 5.2], 100.0, t, 0.05, MatchType::Broad(weights))?;
    let mc = price_mc(&broad, &c0, &sigma, &corr, 200_000, 1)?;
    println!("broad match over sub-keywords: {:.6} +- {:.6}", mc.pi, mc.mc_std_error);
    Ok(())
}
