//! Least squares via Householder QR, with the residual diagnostics battery:
//! Jarque-Bera normality, Breusch-Pagan and Koenker-Bassett heteroskedasticity.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{chi2_sf, t_two_sided};

/// Relative pivot size below which a (unit-norm) column is treated as dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub region: String,
    pub year: i32,
}

/// Response vector plus named regressor matrix, one row per region-year.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    response: DVector<f64>,
    regressors: DMatrix<f64>,
    column_names: Vec<String>,
    row_keys: Vec<RowKey>,
}

impl DesignMatrix {
    pub fn new(
        response: DVector<f64>,
        regressors: DMatrix<f64>,
        column_names: Vec<String>,
        row_keys: Vec<RowKey>,
    ) -> Result<Self> {
        let (n, k) = regressors.shape();
        if response.len() != n || row_keys.len() != n || column_names.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "response {} / regressors {n}x{k} / names {} / keys {}",
                response.len(),
                column_names.len(),
                row_keys.len()
            )));
        }
        if k == 0 || n <= k {
            return Err(Error::InvalidInput(format!(
                "design needs more rows than columns (n = {n}, k = {k})"
            )));
        }
        if response
            .iter()
            .chain(regressors.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput(
                "design contains non-finite values".into(),
            ));
        }
        let unique: HashSet<&String> = column_names.iter().collect();
        if unique.len() != k {
            return Err(Error::InvalidInput("duplicate column names".into()));
        }
        Ok(DesignMatrix {
            response,
            regressors,
            column_names,
            row_keys,
        })
    }

    /// Design with generic row keys (`row{i}`, year 0), for cross-sectional use.
    pub fn from_columns(
        response: DVector<f64>,
        regressors: DMatrix<f64>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let keys = (0..response.len())
            .map(|i| RowKey {
                region: format!("row{i:05}"),
                year: 0,
            })
            .collect();
        Self::new(response, regressors, column_names, keys)
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn regressors(&self) -> &DMatrix<f64> {
        &self.regressors
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row_keys(&self) -> &[RowKey] {
        &self.row_keys
    }

    pub fn nrows(&self) -> usize {
        self.regressors.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.regressors.ncols()
    }

    /// Same regressors and keys, new response.
    pub fn with_response(&self, response: DVector<f64>) -> Result<Self> {
        Self::new(
            response,
            self.regressors.clone(),
            self.column_names.clone(),
            self.row_keys.clone(),
        )
    }

    /// Index of the first column that is a nonzero constant, if any.
    pub fn intercept_column(&self) -> Option<usize> {
        intercept_column(&self.regressors)
    }
}

pub(crate) fn intercept_column(x: &DMatrix<f64>) -> Option<usize> {
    (0..x.ncols()).find(|&j| {
        let c = x[(0, j)];
        c != 0.0 && x.column(j).iter().all(|&v| v == c)
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OlsFit {
    pub column_names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub std_errors: DVector<f64>,
    pub t_stats: DVector<f64>,
    pub p_values: DVector<f64>,
    pub residuals: DVector<f64>,
    pub fitted: DVector<f64>,
    /// e'e / (n - k)
    pub sigma2: f64,
    /// `None` when the response has zero total variation.
    pub r_squared: Option<f64>,
    pub see: f64,
    pub df: usize,
    pub rss: f64,
    pub tss: f64,
    pub has_intercept: bool,
    /// (X'X)^-1 from the QR factor, reused for covariance and downstream tests.
    pub xtx_inv: DMatrix<f64>,
}

impl OlsFit {
    pub fn nobs(&self) -> usize {
        self.residuals.len()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.xtx_inv * self.sigma2
    }

    /// Gaussian log-likelihood at the ML variance e'e/n.
    pub fn log_likelihood(&self) -> f64 {
        gaussian_log_likelihood(self.rss, self.nobs())
    }
}

pub(crate) fn gaussian_log_likelihood(rss: f64, n: usize) -> f64 {
    let n = n as f64;
    -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + (rss / n).ln() + 1.0)
}

/// Coefficients, residuals and (X'X)^-1 from a column-scaled Householder QR.
pub(crate) struct LeastSquares {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub xtx_inv: DMatrix<f64>,
}

pub(crate) fn least_squares(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    names: &[String],
) -> Result<LeastSquares> {
    let k = x.ncols();
    let scales: Vec<f64> = (0..k).map(|j| x.column(j).norm()).collect();
    let zero_cols: Vec<String> = scales
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == 0.0)
        .map(|(j, _)| names[j].clone())
        .collect();
    if !zero_cols.is_empty() {
        return Err(Error::RankDeficient { columns: zero_cols });
    }
    let mut xs = x.clone();
    for (j, s) in scales.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    let qr = xs.qr();
    let r = qr.r();
    let dependent: Vec<String> = (0..k)
        .filter(|&j| r[(j, j)].abs() < RANK_TOL)
        .map(|j| names[j].clone())
        .collect();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }
    let qty = qr.q().transpose() * y;
    let beta_scaled = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularSystem("triangular solve failed".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::SingularSystem("triangular inverse failed".into()))?;
    let mut xtx_inv = &r_inv * r_inv.transpose();
    let mut coefficients = beta_scaled;
    for j in 0..k {
        coefficients[j] /= scales[j];
        for i in 0..k {
            xtx_inv[(i, j)] /= scales[i] * scales[j];
        }
    }
    let residuals = y - x * &coefficients;
    Ok(LeastSquares {
        coefficients,
        residuals,
        xtx_inv,
    })
}

/// Ordinary least squares on `design`.
pub fn ols_fit(design: &DesignMatrix) -> Result<OlsFit> {
    ols_on(
        design.regressors(),
        design.response(),
        design.column_names(),
    )
}

pub(crate) fn ols_on(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<OlsFit> {
    let (n, k) = x.shape();
    let ls = least_squares(x, y, names)?;
    let df = n - k;
    let rss = ls.residuals.norm_squared();
    let sigma2 = rss / df as f64;
    let has_intercept = intercept_column(x).is_some();
    let tss = if has_intercept {
        let mean = y.mean();
        y.iter().map(|v| (v - mean).powi(2)).sum()
    } else {
        y.norm_squared()
    };
    let r_squared = if tss > 0.0 {
        Some((1.0 - rss / tss).clamp(if has_intercept { 0.0 } else { f64::MIN }, 1.0))
    } else {
        None
    };
    let std_errors =
        DVector::from_iterator(k, (0..k).map(|j| (sigma2 * ls.xtx_inv[(j, j)]).sqrt()));
    let t_stats = ls.coefficients.zip_map(&std_errors, |b, s| b / s);
    let p_values = t_stats.map(|t| t_two_sided(t, df as f64));
    Ok(OlsFit {
        column_names: names.to_vec(),
        fitted: y - &ls.residuals,
        coefficients: ls.coefficients,
        std_errors,
        t_stats,
        p_values,
        residuals: ls.residuals,
        sigma2,
        r_squared,
        see: sigma2.sqrt(),
        df,
        rss,
        tss,
        has_intercept,
        xtx_inv: ls.xtx_inv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Reject,
    Retain,
}

/// A test statistic with its chi-squared (or normal) p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestStat {
    pub name: String,
    pub statistic: f64,
    pub df: Option<usize>,
    pub p_value: f64,
    pub decision_at_5pct: Decision,
}

impl TestStat {
    pub fn chi2(name: &str, statistic: f64, df: usize) -> Self {
        Self::with_p(name, statistic, Some(df), chi2_sf(statistic, df as f64))
    }

    pub fn with_p(name: &str, statistic: f64, df: Option<usize>, p_value: f64) -> Self {
        TestStat {
            name: name.to_string(),
            statistic,
            df,
            p_value,
            decision_at_5pct: if p_value < 0.05 {
                Decision::Reject
            } else {
                Decision::Retain
            },
        }
    }

    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Jarque-Bera normality test from moment estimators of skewness and kurtosis.
pub fn jarque_bera(residuals: &[f64]) -> Result<TestStat> {
    let n = residuals.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "Jarque-Bera needs n >= 4, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = residuals.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &e in residuals {
        let d = e - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let scale = residuals.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    if m2 == 0.0 || m2.sqrt() <= 1e-12 * scale {
        return Err(Error::DegenerateSample(
            "residuals have zero variance".into(),
        ));
    }
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    let jb = nf * (skew * skew / 6.0 + (kurt - 3.0).powi(2) / 24.0);
    Ok(TestStat::chi2("JB", jb, 2))
}

fn heteroskedasticity_df(design: &DesignMatrix) -> usize {
    let k = design.ncols();
    if design.intercept_column().is_some() {
        (k - 1).max(1)
    } else {
        k
    }
}

fn explained_sum_of_squares(target: &DVector<f64>, design: &DesignMatrix) -> Result<(f64, f64)> {
    let ls = least_squares(design.regressors(), target, design.column_names())?;
    let fitted = target - &ls.residuals;
    let mean = target.mean();
    let ess = fitted.iter().map(|f| (f - mean).powi(2)).sum();
    let tss = target.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((ess, tss))
}

fn squared_residuals(fit: &OlsFit, design: &DesignMatrix) -> Result<(DVector<f64>, f64)> {
    if fit.nobs() != design.nrows() {
        return Err(Error::DimensionMismatch(
            "fit and design row counts differ".into(),
        ));
    }
    let n = fit.nobs() as f64;
    let sq = fit.residuals.map(|e| e * e);
    let sigma2_ml = sq.sum() / n;
    if sigma2_ml <= 0.0 {
        return Err(Error::DegenerateSample(
            "residuals are identically zero".into(),
        ));
    }
    Ok((sq, sigma2_ml))
}

/// Breusch-Pagan LM test: half the explained sum of squares from regressing
/// `e^2 / (e'e/n)` on the original regressors.
pub fn breusch_pagan(fit: &OlsFit, design: &DesignMatrix) -> Result<TestStat> {
    let (sq, sigma2_ml) = squared_residuals(fit, design)?;
    let (ess, _) = explained_sum_of_squares(&(sq / sigma2_ml), design)?;
    Ok(TestStat::chi2(
        "BP",
        0.5 * ess,
        heteroskedasticity_df(design),
    ))
}

/// Koenker-Bassett studentized test: `n * R^2` of `e^2` on the regressors.
pub fn koenker_bassett(fit: &OlsFit, design: &DesignMatrix) -> Result<TestStat> {
    let (sq, _) = squared_residuals(fit, design)?;
    let (ess, tss) = explained_sum_of_squares(&sq, design)?;
    // squared residuals constant up to rounding: nothing to explain
    let floor = 1e-24 * sq.len() as f64 * sq.mean().powi(2);
    let r2 = if tss > floor { ess / tss } else { 0.0 };
    Ok(TestStat::chi2(
        "KB",
        fit.nobs() as f64 * r2,
        heteroskedasticity_df(design),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(y: &[f64], cols: &[&[f64]]) -> DesignMatrix {
        let n = y.len();
        let mut x = DMatrix::zeros(n, cols.len() + 1);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for (j, c) in cols.iter().enumerate() {
                x[(i, j + 1)] = c[i];
            }
        }
        let mut names = vec!["intercept".to_string()];
        names.extend((1..=cols.len()).map(|j| format!("x{j}")));
        DesignMatrix::from_columns(DVector::from_column_slice(y), x, names).unwrap()
    }

    #[test]
    fn exact_fit() {
        let d = design(&[1.0, 2.0, 3.0], &[&[0.0, 1.0, 2.0]]);
        let fit = ols_fit(&d).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-12);
        assert!(fit.residuals.amax() < 1e-12);
        assert!((fit.r_squared.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response_intercept_only() {
        let d = DesignMatrix::from_columns(
            DVector::from_element(4, 2.5),
            DMatrix::from_element(4, 1, 1.0),
            vec!["intercept".into()],
        )
        .unwrap();
        let fit = ols_fit(&d).unwrap();
        assert!((fit.coefficients[0] - 2.5).abs() < 1e-12);
        assert!(fit.r_squared.is_none());
    }

    #[test]
    fn bivariate_matches_hand_solved_normal_equations() {
        // x = 1..6, y = [2, 3, 5, 4, 6, 8]
        // Sx = 21, Sxx = 91, Sy = 28, Sxy = 2+6+15+16+30+48 = 117
        // slope = (6*117 - 21*28) / (6*91 - 21^2) = (702 - 588) / 105 = 114/105
        // intercept = (28 - slope*21) / 6
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [2.0, 3.0, 5.0, 4.0, 6.0, 8.0];
        let fit = ols_fit(&design(&y, &[&x])).unwrap();
        let slope = 114.0 / 105.0;
        let intercept = (28.0 - slope * 21.0) / 6.0;
        assert!((fit.coefficients[1] - slope).abs() < 1e-10);
        assert!((fit.coefficients[0] - intercept).abs() < 1e-10);
    }

    #[test]
    fn rank_deficiency_names_column() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0];
        let d = design(&[1.0, 0.0, 2.0, 1.0, 3.0], &[&a, &b]);
        match ols_fit(&d) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["x2".to_string()]),
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn jarque_bera_examples() {
        let jb = jarque_bera(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert!((jb.statistic - 2.0 / 3.0).abs() < 1e-12);

        let r3 = 3.0f64.sqrt();
        let jb = jarque_bera(&[-r3, 0.0, 0.0, 0.0, 0.0, r3]).unwrap();
        assert!(jb.statistic.abs() < 1e-12);
        assert!((jb.p_value - 1.0).abs() < 1e-12);

        assert!(matches!(
            jarque_bera(&[0.3; 5]),
            Err(Error::DegenerateSample(_))
        ));
        assert!(jarque_bera(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn heteroskedasticity_zero_when_squares_constant() {
        // residuals of +-1 around the fitted line: y = 1 + x + e with e alternating
        let x = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let e = [1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0];
        let y: Vec<f64> = x.iter().zip(&e).map(|(x, e)| 1.0 + x + e).collect();
        let d = design(&y, &[&x]);
        let fit = ols_fit(&d).unwrap();
        // e is orthogonal to [1, x] so the fit reproduces it exactly
        assert!((fit.residuals[0] - 1.0).abs() < 1e-12);
        let bp = breusch_pagan(&fit, &d).unwrap();
        let kb = koenker_bassett(&fit, &d).unwrap();
        assert!(bp.statistic.abs() < 1e-20);
        assert!(kb.statistic.abs() < 1e-20);
        assert_eq!(bp.df, Some(1));
    }
}
