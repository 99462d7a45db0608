//! Pricing engine and arbitrage laboratory for multi-keyword multi-click
//! advertisement options.
//!
//! An ad option gives an advertiser the right, but not the obligation, to buy
//! up to `m` clicks on any of `n` candidate keywords at pre-agreed fixed
//! cost-per-click (CPC) prices before an expiry date. The crate covers the
//! whole workflow:
//!
//! - [`market_data`]: load daily CPC series from CSV and compute log returns.
//! - [`calibration`]: estimate per-keyword volatility/drift and the
//!   cross-keyword correlation matrix.
//! - [`sde`]: correlated path simulation for GBM and four alternative
//!   dynamics (CEV, MRD, CIR, HWV).
//! - [`stats`]: normality, autocorrelation and two-sample similarity tests.
//! - [`pricing`]: Monte Carlo, closed-form (one and two keywords) and
//!   quadrature pricers.
//! - [`hedging`]: hedging deltas, delta-hedged backtests and arbitrage
//!   classification.
//! - [`revenue`]: the seller's expected revenue difference between selling a
//!   click through an option and through an auction.
//! - [`cli`]: batch commands that wire the modules together and write CSV
//!   reports.

pub mod calibration;
pub mod cli;
pub mod error;
pub mod hedging;
pub mod market_data;
pub mod pricing;
pub mod quadrature;
pub mod revenue;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};

/// Calendar days per year. Every horizon `d` days long is `d / 365` years.
pub const DAYS_PER_YEAR: f64 = 365.0;

/// Length of one daily step in years.
pub const DAY: f64 = 1.0 / DAYS_PER_YEAR;
