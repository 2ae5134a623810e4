//! Spatial panel econometrics for regional net-migration regressions.
//!
//! The pipeline runs from a regional panel CSV ([`dataset`]) through a
//! regression design, panel estimators ([`panel`]), least squares with
//! residual diagnostics ([`lsq`]), spatial weights ([`weights`]) and the
//! spatial tests and maximum-likelihood models ([`spatial`]). [`simulate`]
//! generates synthetic panels for validation and [`report`] renders results.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod lsq;
pub mod panel;
pub mod report;
pub mod simulate;
pub mod spatial;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
