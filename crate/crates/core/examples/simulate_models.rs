//! Simulates correlated CPC paths under GBM and the four alternative
//! dynamics, all driven by the same noise.

use ad_options::calibration::{CorrMatrix, GbmParams};
use ad_options::sde::{sample_correlated_normals, simulate_path_with_noise, DriftMode, SdeKind, SdeModel};
use ad_options::{Result, DAY};

fn main() -> Result<()> {
    let c0 = [3.5, 4.2, 6.0];
    let corr = CorrMatrix::from_rows(&[vec![1.0, 0.5, 0.2], vec![0.5, 1.0, 0.3], vec![0.2, 0.3, 1.0]])?;
    let params = [
        GbmParams::new("hotel", 0.05, 0.3)?,
        GbmParams::new("flight", 0.05, 0.25)?,
        GbmParams::new("car", 0.05, 0.4)?,
    ];
    let noise = sample_correlated_normals(&corr, 50, 31, 2024)?;
    for kind in SdeKind::ALL {
        let model = SdeModel::from_calibration(kind, &params, &c0, 0.5)?;
        let paths = simulate_path_with_noise(&c0, &model, 31.0 * DAY, DriftMode::RealWorld, &noise, 2024)?;
        let terminal: Vec<f64> = (0..paths.n_paths()).map(|p| paths.get(p, paths.n_steps())[0]).collect();
        let mean = terminal.iter().sum::<f64>() / terminal.len() as f64;
        let min = terminal.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("{kind}: hotel CPC after 31 days: mean {mean:.4}, min {min:.4}, negative values: {}", paths.has_negative());
    }
    Ok(())
}
