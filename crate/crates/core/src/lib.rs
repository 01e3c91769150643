//! Information-ratio analysis of time-series momentum strategies.
//!
//! The crate is organised as a pipeline:
//!
//! - [`timeseries`]: price ingestion, log returns, weekly/monthly resampling and
//!   trailing mean-absolute normalization.
//! - [`strategy`]: the moving-average momentum rule, its payoffs and empirical
//!   IR-versus-lookback curves.
//! - [`theory`]: closed-form mean, variance and IR of the strategy for a
//!   stationary Gaussian process.
//! - [`regimes`]: piecewise-linear breakpoint detection, per-regime diagnostics
//!   and ensemble-averaged IR curves.
//! - [`simulate`]: synthetic processes (iid, moving-average, square-wave drift)
//!   and Monte Carlo IR curves.
//! - [`fit`]: least-squares fits of the theoretical and simulated IR curves.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod io;
pub mod optim;
pub mod regimes;
pub mod simulate;
pub mod strategy;
pub mod theory;
pub mod timeseries;

pub use error::{Error, Result};
