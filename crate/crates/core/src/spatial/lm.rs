//! Lagrange-multiplier tests for spatial lag and spatial error dependence
//! computed from OLS residuals, with the robust variants that correct each
//! test for local presence of the other alternative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{least_squares, DesignMatrix, OlsFit, TestStat};
use crate::weights::SpatialWeights;

/// Building blocks shared by the four statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmComponents {
    /// e'Wy / sigma2
    pub d: f64,
    /// e'We / sigma2
    pub g: f64,
    /// tr(W'W + WW)
    pub t: f64,
    /// (WXb)'M(WXb) / sigma2 + T
    pub big_d: f64,
}

impl LmComponents {
    pub fn compute(fit: &OlsFit, design: &DesignMatrix, w: &SpatialWeights) -> Result<Self> {
        let n = design.nrows();
        if w.len() != n || fit.nobs() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} design rows, {} residuals, {} weight rows",
                fit.nobs(),
                w.len()
            )));
        }
        let m = w.matrix();
        let mut t = 0.0;
        for i in 0..n {
            for j in 0..n {
                t += m[(i, j)] * (m[(i, j)] + m[(j, i)]);
            }
        }
        if t <= 0.0 {
            return Err(Error::DegenerateWeights("tr(W'W + WW) is zero".into()));
        }
        let e = &fit.residuals;
        let sigma2 = e.norm_squared() / n as f64;
        if sigma2 <= 0.0 {
            return Err(Error::DegenerateSample(
                "residuals are identically zero".into(),
            ));
        }
        let wy = w.lag(design.response());
        let we = w.lag(e);
        let wxb = w.lag(&fit.fitted);
        let annihilated = least_squares(design.regressors(), &wxb, design.column_names())?;
        Ok(LmComponents {
            d: e.dot(&wy) / sigma2,
            g: e.dot(&we) / sigma2,
            t,
            big_d: annihilated.residuals.norm_squared() / sigma2 + t,
        })
    }

    pub fn lm_lag(&self) -> TestStat {
        TestStat::chi2("LM_lag", self.d * self.d / self.big_d, 1)
    }

    pub fn lm_error(&self) -> TestStat {
        TestStat::chi2("LM_err", self.g * self.g / self.t, 1)
    }

    pub fn robust_lm_lag(&self) -> Result<TestStat> {
        let denom = self.big_d - self.t;
        if denom <= 1e-12 * self.big_d {
            return Err(Error::NumericalBreakdown(format!(
                "robust lag denominator D - T = {denom}"
            )));
        }
        Ok(TestStat::chi2(
            "RLM_lag",
            (self.d - self.g).powi(2) / denom,
            1,
        ))
    }

    pub fn robust_lm_error(&self) -> Result<TestStat> {
        let ratio = self.t / self.big_d;
        let denom = self.t * (1.0 - ratio);
        if denom <= 1e-12 * self.t {
            return Err(Error::NumericalBreakdown(format!(
                "robust error denominator T(1 - T/D) = {denom}"
            )));
        }
        Ok(TestStat::chi2(
            "RLM_err",
            (self.g - ratio * self.d).powi(2) / denom,
            1,
        ))
    }
}

pub fn lm_lag(fit: &OlsFit, design: &DesignMatrix, w: &SpatialWeights) -> Result<TestStat> {
    Ok(LmComponents::compute(fit, design, w)?.lm_lag())
}

pub fn lm_error(fit: &OlsFit, design: &DesignMatrix, w: &SpatialWeights) -> Result<TestStat> {
    Ok(LmComponents::compute(fit, design, w)?.lm_error())
}

pub fn robust_lm_lag(fit: &OlsFit, design: &DesignMatrix, w: &SpatialWeights) -> Result<TestStat> {
    LmComponents::compute(fit, design, w)?.robust_lm_lag()
}

pub fn robust_lm_error(
    fit: &OlsFit,
    design: &DesignMatrix,
    w: &SpatialWeights,
) -> Result<TestStat> {
    LmComponents::compute(fit, design, w)?.robust_lm_error()
}
