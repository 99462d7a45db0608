//! Hedging deltas and delta-hedged backtests that test whether the option
//! price admits arbitrage.

use ad_options::calibration::{CorrMatrix, GbmParams};
use ad_options::hedging::{
    benchmark_rate, classify_arbitrage, delta_closed, delta_fd_mc, delta_mc, no_arbitrage_fraction,
    synthetic_backtests, BacktestConfig,
};
use ad_options::pricing::OptionSpec;
use ad_options::sde::{SdeKind, SdeModel};
use ad_options::{Result, DAY};

fn main() -> Result<()> {
    let t = 31.0 * DAY;
    let one = OptionSpec::new(vec!["hotel".into()], vec![3.8505], 100.0, t, 0.05)?;
    let id = CorrMatrix::identity(1);
    println!("deltas of one click:");
    println!("  closed form {:.5}", delta_closed(&one, 3.5, 0.3)?.delta[0]);
    let mc = delta_mc(&one, &[3.5], &[0.3], &id, 200_000, 4)?;
    println!("  pathwise MC {:.5} +- {:.5}", mc.delta[0], mc.std_error[0]);
    let fd = delta_fd_mc(&one, &[3.5], &[0.3], &id, 200_000, 4, 1e-2)?;
    println!("  bumped MC   {:.5} +- {:.5}", fd.delta[0], fd.std_error[0]);

    let r_tilde = benchmark_rate(0.05, 30.0, 1.0);
    for gamma in [0.0, r_tilde, 0.2] {
        let (alpha, verdict) = classify_arbitrage(gamma, r_tilde, 0.05);
        println!("gamma = {gamma:.4}: alpha = {alpha:+.4}, {verdict}");
    }

    let spec = OptionSpec::new(vec!["hotel".into(), "flight".into()], vec![3.8505, 4.6704], 100.0, t, 0.05)?;
    let c0 = [3.5, 4.2];
    let params = [GbmParams::new("hotel", 0.05, 0.3)?, GbmParams::new("flight", 0.05, 0.25)?];
    let corr = CorrMatrix::pair(0.2247)?;
    let sigma = [0.3, 0.25];
    let cfg = BacktestConfig::default();
    for kind in [SdeKind::Gbm, SdeKind::Cev, SdeKind::Cir] {
        let actual = SdeModel::from_calibration(kind, &params, &c0, 0.5)?;
        let reports = synthetic_backtests(&spec, &c0, &actual, &corr, &sigma, 20, &cfg, 17)?;
        println!("{kind} paths: {:.0}% of 20 trials without arbitrage", 100.0 * no_arbitrage_fraction(&reports));
    }
    Ok(())
}
