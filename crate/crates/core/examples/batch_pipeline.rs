//! Runs every batch command on a generated CPC file, the same way the
//! `adopt` binary does, and lists the reports written.

use std::fs;

use ad_options::calibration::CorrMatrix;
use ad_options::cli::{run, Command, RunConfig};
use ad_options::sde::{simulate_path, DriftMode, SdeModel};
use ad_options::DAY;
use chrono::{Duration, NaiveDate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("ad_options_batch_pipeline");
    fs::create_dir_all(&dir)?;

    let model = SdeModel::gbm(&[0.05, 0.05], &[0.3, 0.25])?;
    let paths = simulate_path(&[3.5, 4.2], &model, &CorrMatrix::pair(0.3)?, 119.0 * DAY, 119, DriftMode::RealWorld, 1, 1)?;
    let start = NaiveDate::from_ymd_opt(2012, 1, 1).expect("valid date");
    let mut csv = String::from("keyword,date,cpc\n");
    for (k, name) in ["hotel", "flight"].iter().enumerate() {
        for (d, c) in paths.keyword_series(0, k).iter().enumerate() {
            csv.push_str(&format!("{name},{},{c:.6}\n", start + Duration::days(d as i64)));
        }
    }
    let input = dir.join("cpc.csv");
    fs::write(&input, csv)?;

    let mut cfg = RunConfig::parse(
        "# two keywords, calibrated on Jan-Mar and tested in April\n\
         input = cpc.csv\n\
         seed = 42\n\
         training_start = 2012-01-01\n\
         training_end = 2012-03-31\n\
         test_start = 2012-04-01\n\
         test_end = 2012-04-29\n\
         keywords = hotel, flight\n\
         F = 3.8505, 4.6704\n\
         m = 100\n\
         T_days = 28\n\
         r = 0.05\n\
         model = gbm\n\
         n_paths = 20000\n\
         n_trials = 20\n\
         grid_points = 21\n",
    )?;
    cfg.set("input", input.display().to_string())?;
    cfg.set("output_dir", dir.join("out").display().to_string())?;
    for command in Command::ALL {
        let summary = run(command, &cfg, None)?;
        println!("{command}: {}", summary.message);
        println!("  wrote {}", summary.files.join(", "));
    }
    Ok(())
}
