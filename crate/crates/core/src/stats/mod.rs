//! Statistical machinery: normal kernels, GBM validation tests and
//! two-sample similarity tests.

mod autocorr;
mod normal;
mod rank;
mod report;
mod shapiro;

pub use autocorr::{acf, default_lags, ljung_box, LjungBox};
pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
pub use rank::{ansari_bradley, ks_two_sample, rank_tests, wilcoxon_rank_sum, RankTests, TwoSampleTest};
pub use report::{gof_report, similarity_report, write_gof_csv, write_similarity_csv, GofReport, SimilarityReport};
pub use shapiro::{shapiro_wilk, ShapiroWilk};

/// Significance level used when none is configured.
pub const DEFAULT_ALPHA: f64 = 0.05;
