//! Checks whether log returns look like a GBM (normal and uncorrelated) and
//! compares simulated paths of alternative dynamics with an observed series.

use ad_options::calibration::{CorrMatrix, GbmParams};
use ad_options::sde::{derive_seed, simulate_path, DriftMode, SdeKind, SdeModel};
use ad_options::stats::{gof_report, similarity_report, DEFAULT_ALPHA};
use ad_options::{Result, DAY};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let iid: Vec<f64> = (0..60).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 0.02 * z }).collect();
    let mut ar = vec![0.0];
    for _ in 1..60 {
        let z: f64 = StandardNormal.sample(&mut rng);
        ar.push(0.8 * ar[ar.len() - 1] + 0.02 * z);
    }
    for (name, returns) in [("iid normal", &iid), ("AR(1)", &ar)] {
        let g = gof_report(name, returns, DEFAULT_ALPHA, None)?;
        println!(
            "{name:>10}: Shapiro-Wilk p = {:.3}, Ljung-Box p = {:.3} ({} lags), GBM ok = {}",
            g.shapiro_wilk_p, g.ljung_box_p, g.lags, g.gbm_ok
        );
    }

    let observed = simulate_path(&[4.0], &SdeModel::gbm(&[0.0], &[0.3])?, &CorrMatrix::identity(1), 30.0 * DAY, 30, DriftMode::RealWorld, 1, 5)?
        .keyword_series(0, 0);
    let params = GbmParams::new("kw", 0.0, 0.3)?;
    for (i, kind) in SdeKind::ALL.into_iter().enumerate() {
        let model = SdeModel::from_calibration(kind, std::slice::from_ref(&params), &[4.0], 0.5)?;
        let sims = simulate_path(&observed[..1], &model, &CorrMatrix::identity(1), 30.0 * DAY, 30, DriftMode::RealWorld, 50, derive_seed(9, i as u64))?;
        let simulated: Vec<Vec<f64>> = (0..50).map(|p| sims.keyword_series(p, 0)).collect();
        let s = similarity_report("kw", kind.name(), &observed, &simulated, DEFAULT_ALPHA)?;
        println!(
            "{kind}: paths not rejected by Wilcoxon {:.0}%, Ansari-Bradley {:.0}%, KS {:.0}%",
            100.0 * s.wilcoxon_not_rejected,
            100.0 * s.ansari_bradley_not_rejected,
            100.0 * s.ks_not_rejected
        );
    }
    Ok(())
}
