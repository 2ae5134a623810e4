//! Spatial diagnostics and estimators for cross-sections.

pub mod diagnostics;
pub mod lm;
pub mod ml;
pub mod moran;
pub mod search;

pub use diagnostics::{diagnose, Diagnostics};
pub use lm::{lm_error, lm_lag, robust_lm_error, robust_lm_lag, LmComponents};
pub use ml::{ml_sar, ml_sem, SpatialFit, SpatialModel};
pub use moran::{morans_i, MoranResult};
pub use search::{decide, spec_search, ChosenModel, SpecSearchResult};

use crate::error::Result;
use crate::lsq::DesignMatrix;
use crate::weights::SpatialWeights;

/// Weights aligned with the rows of `design`.
///
/// A cross-section (one row per region) gets `w` reordered to the design
/// rows; a stacked panel gets block-diagonal weights linking regions within
/// the same year only.
pub fn align_weights(w: &SpatialWeights, design: &DesignMatrix) -> Result<SpatialWeights> {
    let keys = design.row_keys();
    let first_year = keys[0].year;
    if keys.iter().all(|k| k.year == first_year) && keys.len() == w.len() {
        let order: Vec<String> = keys.iter().map(|k| k.region.clone()).collect();
        if order == w.region_order() {
            return Ok(w.clone());
        }
        return w.reorder(&order);
    }
    w.expand_to_rows(keys)
}
