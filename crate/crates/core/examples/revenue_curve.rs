//! The seller's expected revenue gain from selling a click through an option
//! instead of the auction, as a function of the fixed CPC.

use ad_options::calibration::CorrMatrix;
use ad_options::pricing::OptionSpec;
use ad_options::revenue::{expected_spot, revenue_diff_1d, revenue_surface, RevenueGrid, RevenueMethod};
use ad_options::{Result, DAY};

fn main() -> Result<()> {
    let (c0, sigma, r, t) = (3.5, 0.3, 0.05, 31.0 * DAY);
    println!("one keyword:");
    for f in [0.5, 2.0, 3.0, 3.5, 4.0, 5.0, 8.0] {
        println!("  F = {f:.2}: D = {:.5}", revenue_diff_1d(c0, sigma, r, t, f)?);
    }
    println!("  maximum at F = E[C(T)] = {:.4}", expected_spot(c0, r, t));

    let spec = OptionSpec::new(vec!["hotel".into(), "flight".into()], vec![3.5, 4.2], 1.0, t, r)?;
    let grid = RevenueGrid::uniform(&[(2.5, 4.5), (3.0, 5.4)], 21)?;
    let curve = revenue_surface(
        &spec,
        &[3.5, 4.2],
        &[0.3, 0.25],
        &CorrMatrix::pair(0.2247)?,
        &grid,
        RevenueMethod::MonteCarlo { n_paths: 100_000, seed: 8 },
    )?;
    let best = curve.optimum_point();
    println!(
        "two keywords: best grid point F = ({:.3}, {:.3}) with D = {:.5} +- {:.5}",
        best.fixed_cpc[0], best.fixed_cpc[1], best.d, best.std_error
    );
    println!("  at the expected spots D = {:.5}", curve.reference.d);
    Ok(())
}
