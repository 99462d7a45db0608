//! Loads a daily CPC table, windows it and estimates GBM parameters and the
//! cross-keyword correlation matrix.

use ad_options::calibration::{estimate_corr, estimate_sigma, CorrMatrix};
use ad_options::market_data::{log_returns, read_series, DataWindow, WindowRole};
use ad_options::sde::{simulate_path, DriftMode, SdeModel};
use ad_options::{Result, DAY};
use chrono::{Duration, NaiveDate};

fn main() -> Result<()> {
    let names = ["hotel", "flight", "car"];
    let truth = CorrMatrix::from_rows(&[vec![1.0, 0.4, 0.2], vec![0.4, 1.0, 0.3], vec![0.2, 0.3, 1.0]])?;
    let model = SdeModel::gbm(&[0.05, 0.0, -0.1], &[0.3, 0.2, 0.45])?;
    let paths = simulate_path(&[3.5, 4.2, 6.0], &model, &truth, 89.0 * DAY, 89, DriftMode::RealWorld, 1, 11)?;

    let start = NaiveDate::from_ymd_opt(2012, 1, 1).expect("valid date");
    let mut csv = String::from("keyword,date,cpc\n");
    for (k, name) in names.iter().enumerate() {
        for (d, c) in paths.keyword_series(0, k).iter().enumerate() {
            csv.push_str(&format!("{name},{},{c:.6}\n", start + Duration::days(d as i64)));
        }
    }
    csv.push_str("ghost,2012-01-01,0.0\n");

    let window = DataWindow::new(WindowRole::Training, start, start + Duration::days(89))?;
    let report = read_series(csv.as_bytes(), &window)?;
    for r in &report.rejected {
        println!("rejected {}: {}", r.keyword, r.reason);
    }
    let returns = report.series.iter().map(log_returns).collect::<Result<Vec<_>>>()?;
    for r in &returns {
        let p = estimate_sigma(r)?;
        println!("{:>7}: mu = {:+.3}, sigma = {:.3}", p.keyword, p.mu, p.sigma);
    }
    let corr = estimate_corr(&returns)?;
    println!("correlation (PSD repair: {}):", corr.repaired);
    for i in 0..corr.corr.dim() {
        let row: Vec<String> = (0..corr.corr.dim()).map(|j| format!("{:+.3}", corr.corr.get(i, j))).collect();
        println!("  {}", row.join("  "));
    }
    Ok(())
}
