//! Forward specification search: OLS first, then the LM tests decide
//! whether a spatial lag or spatial error model is warranted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{ols_fit, DesignMatrix, TestStat};
use crate::spatial::lm::LmComponents;
use crate::spatial::moran::morans_i;
use crate::weights::SpatialWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChosenModel {
    Ols,
    Sar,
    Sem,
}

impl std::fmt::Display for ChosenModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChosenModel::Ols => "OLS",
            ChosenModel::Sar => "SAR",
            ChosenModel::Sem => "SEM",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecSearchResult {
    pub chosen: ChosenModel,
    /// Every statistic computed, in order: Moran (z-score), LM_lag, LM_err, RLM_lag, RLM_err.
    pub trail: Vec<TestStat>,
    /// One line per step of the decision rule.
    pub steps: Vec<String>,
    pub significance_level: f64,
}

fn find<'a>(trail: &'a [TestStat], name: &str) -> Option<&'a TestStat> {
    trail.iter().find(|t| t.name == name)
}

/// The decision rule, as a pure function of the recorded statistics.
pub fn decide(trail: &[TestStat], alpha: f64) -> Result<ChosenModel> {
    let missing = |n: &str| Error::InvalidInput(format!("trail lacks `{n}`"));
    let lag = find(trail, "LM_lag").ok_or_else(|| missing("LM_lag"))?;
    let err = find(trail, "LM_err").ok_or_else(|| missing("LM_err"))?;
    match (lag.rejects_at(alpha), err.rejects_at(alpha)) {
        (false, false) => Ok(ChosenModel::Ols),
        (true, false) => Ok(ChosenModel::Sar),
        (false, true) => Ok(ChosenModel::Sem),
        (true, true) => {
            let rlag = find(trail, "RLM_lag").ok_or_else(|| missing("RLM_lag"))?;
            let rerr = find(trail, "RLM_err").ok_or_else(|| missing("RLM_err"))?;
            let lag_wins = rlag.p_value < rerr.p_value
                || (rlag.p_value == rerr.p_value && rlag.statistic >= rerr.statistic);
            Ok(if lag_wins {
                ChosenModel::Sar
            } else {
                ChosenModel::Sem
            })
        }
    }
}

pub fn spec_search(
    design: &DesignMatrix,
    w: &SpatialWeights,
    alpha: f64,
) -> Result<SpecSearchResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "significance level {alpha} outside (0, 1)"
        )));
    }
    let fit = ols_fit(design)?;
    let mut steps = vec![format!("1. OLS fit on {} observations", fit.nobs())];
    let mut trail = Vec::new();

    if let Ok(moran) = morans_i(&fit.residuals, w) {
        trail.push(TestStat::with_p(
            "Moran_z",
            moran.z_score,
            None,
            moran.p_value,
        ));
    }
    let lm = LmComponents::compute(&fit, design, w)?;
    let (lag, err) = (lm.lm_lag(), lm.lm_error());
    steps.push(format!(
        "2. LM_lag = {:.4} (p = {:.4}), LM_err = {:.4} (p = {:.4})",
        lag.statistic, lag.p_value, err.statistic, err.p_value
    ));
    let both = lag.rejects_at(alpha) && err.rejects_at(alpha);
    trail.push(lag);
    trail.push(err);

    // robust forms are always recorded; they only drive the decision when both raw tests reject
    match (lm.robust_lm_lag(), lm.robust_lm_error()) {
        (Ok(a), Ok(b)) => {
            trail.push(a);
            trail.push(b);
        }
        (Err(e), _) | (_, Err(e)) if both => return Err(e),
        _ => {}
    }

    let chosen = decide(&trail, alpha)?;
    steps.push(match chosen {
        ChosenModel::Ols => format!("3. neither LM test significant at {alpha}: keep OLS"),
        _ if !both => format!("4. exactly one LM test significant at {alpha}: choose {chosen}"),
        _ => format!("5. both LM tests significant: robust tests favour {chosen}"),
    });
    if chosen != ChosenModel::Ols {
        steps.push(format!("6. estimate {chosen} by maximum likelihood"));
    }
    Ok(SpecSearchResult {
        chosen,
        trail,
        steps,
        significance_level: alpha,
    })
}
