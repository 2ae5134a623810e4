//! The full residual battery for a cross-section OLS fit.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lsq::{
    breusch_pagan, jarque_bera, koenker_bassett, ols_fit, DesignMatrix, OlsFit, TestStat,
};
use crate::spatial::lm::LmComponents;
use crate::spatial::moran::{morans_i, MoranResult};
use crate::weights::SpatialWeights;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub fit: OlsFit,
    pub jarque_bera: TestStat,
    pub breusch_pagan: TestStat,
    pub koenker_bassett: TestStat,
    pub moran: MoranResult,
    pub lm_lag: TestStat,
    pub robust_lm_lag: TestStat,
    pub lm_error: TestStat,
    pub robust_lm_error: TestStat,
}

impl Diagnostics {
    /// The tests in reporting order: JB, BP, KB, Moran, LM_lag, RLM_lag, LM_err, RLM_err.
    pub fn tests(&self) -> Vec<TestStat> {
        vec![
            self.jarque_bera.clone(),
            self.breusch_pagan.clone(),
            self.koenker_bassett.clone(),
            TestStat::with_p("Moran_z", self.moran.z_score, None, self.moran.p_value),
            self.lm_lag.clone(),
            self.robust_lm_lag.clone(),
            self.lm_error.clone(),
            self.robust_lm_error.clone(),
        ]
    }
}

/// Fits OLS on `design` and runs every test against `w`, which must already
/// be aligned with the design rows.
pub fn diagnose(design: &DesignMatrix, w: &SpatialWeights) -> Result<Diagnostics> {
    let fit = ols_fit(design)?;
    let jb = jarque_bera(fit.residuals.as_slice())?;
    let bp = breusch_pagan(&fit, design)?;
    let kb = koenker_bassett(&fit, design)?;
    let moran = morans_i(&fit.residuals, w)?;
    let lm = LmComponents::compute(&fit, design, w)?;
    Ok(Diagnostics {
        jarque_bera: jb,
        breusch_pagan: bp,
        koenker_bassett: kb,
        moran,
        lm_lag: lm.lm_lag(),
        robust_lm_lag: lm.robust_lm_lag()?,
        lm_error: lm.lm_error(),
        robust_lm_error: lm.robust_lm_error()?,
        fit,
    })
}
