//! Maximum-likelihood spatial lag (SAR) and spatial error (SEM) models.
//!
//! Both are fit by maximizing the likelihood concentrated in the scalar
//! autoregressive parameter. The log-determinant `ln|I - rho W|` comes from the
//! cached eigenvalues of W. Standard errors come from a central-difference
//! Hessian of the full log-likelihood in `(beta, rho, sigma2)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{least_squares, DesignMatrix};
use crate::weights::SpatialWeights;

/// Distance from an interval endpoint that counts as a boundary solution.
const BOUNDARY_TOL: f64 = 1e-6;
const PARAM_TOL: f64 = 1e-8;
const GRID_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpatialModel {
    /// y = rho W y + X b + e
    Sar,
    /// y = X b + u, u = lambda W u + e
    Sem,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpatialFit {
    pub model: SpatialModel,
    /// rho for SAR, lambda for SEM.
    pub rho_or_lambda: f64,
    pub rho_or_lambda_std_error: f64,
    pub column_names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub coefficient_std_errors: DVector<f64>,
    pub sigma2: f64,
    pub log_likelihood: f64,
    /// Admissible open interval for the spatial parameter.
    pub interval: (f64, f64),
    pub residuals: DVector<f64>,
}

fn check_dims(design: &DesignMatrix, w: &SpatialWeights) -> Result<()> {
    if w.len() != design.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} design rows but {} weight rows",
            design.nrows(),
            w.len()
        )));
    }
    Ok(())
}

fn concentrated(n: usize, sigma2: f64, log_det: f64) -> f64 {
    let nf = n as f64;
    -0.5 * nf * ((2.0 * PI).ln() + 1.0) - 0.5 * nf * sigma2.ln() + log_det
}

/// Concentrated SAR log-likelihood, precomputed for repeated evaluation.
pub struct SarLikelihood<'a> {
    w: &'a SpatialWeights,
    e0: DVector<f64>,
    el: DVector<f64>,
    b0: DVector<f64>,
    bl: DVector<f64>,
}

impl<'a> SarLikelihood<'a> {
    pub fn new(design: &DesignMatrix, w: &'a SpatialWeights) -> Result<Self> {
        check_dims(design, w)?;
        let x = design.regressors();
        let names = design.column_names();
        let direct = least_squares(x, design.response(), names)?;
        let lagged = least_squares(x, &w.lag(design.response()), names)?;
        Ok(SarLikelihood {
            w,
            e0: direct.residuals,
            el: lagged.residuals,
            b0: direct.coefficients,
            bl: lagged.coefficients,
        })
    }

    /// ML variance of `(y - rho W y)` regressed on X.
    pub fn sigma2(&self, rho: f64) -> f64 {
        (&self.e0 - &self.el * rho).norm_squared() / self.e0.len() as f64
    }

    pub fn coefficients(&self, rho: f64) -> DVector<f64> {
        &self.b0 - &self.bl * rho
    }

    pub fn value(&self, rho: f64) -> f64 {
        concentrated(
            self.e0.len(),
            self.sigma2(rho),
            self.w.spectrum().log_det(rho),
        )
    }
}

/// Concentrated SEM log-likelihood: filtered variables refit at each lambda.
pub struct SemLikelihood<'a> {
    w: &'a SpatialWeights,
    design: &'a DesignMatrix,
    wy: DVector<f64>,
    wx: DMatrix<f64>,
}

impl<'a> SemLikelihood<'a> {
    pub fn new(design: &'a DesignMatrix, w: &'a SpatialWeights) -> Result<Self> {
        check_dims(design, w)?;
        Ok(SemLikelihood {
            w,
            design,
            wy: w.lag(design.response()),
            wx: w.matrix() * design.regressors(),
        })
    }

    /// Coefficients and ML residual variance of the filtered regression.
    pub fn filtered_fit(&self, lambda: f64) -> Result<(DVector<f64>, f64)> {
        let y = self.design.response() - &self.wy * lambda;
        let x = self.design.regressors() - &self.wx * lambda;
        let ls = least_squares(&x, &y, self.design.column_names())?;
        let sigma2 = ls.residuals.norm_squared() / y.len() as f64;
        Ok((ls.coefficients, sigma2))
    }

    pub fn value(&self, lambda: f64) -> Result<f64> {
        let (_, sigma2) = self.filtered_fit(lambda)?;
        Ok(concentrated(
            self.design.nrows(),
            sigma2,
            self.w.spectrum().log_det(lambda),
        ))
    }
}

/// Maximizes `f` on the open interval: a coarse grid to bracket the best
/// point, golden-section to `PARAM_TOL`, then one parabolic step.
pub(crate) fn maximize_scalar<F>(f: F, lower: f64, upper: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let width = upper - lower;
    let lo = lower + 1e-9 * width;
    let hi = upper - 1e-9 * width;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let mut values = Vec::with_capacity(GRID_POINTS);
    for &x in &grid {
        values.push(f(x)?);
    }
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::NumericalBreakdown("likelihood is not finite on the grid".into()))?;
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(GRID_POINTS - 1)];

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > PARAM_TOL * 0.1 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let mut x = 0.5 * (a + b);
    let fx = f(x)?;

    // parabolic refinement through x - h, x, x + h
    let h = (1e-4 * width).min(x - lo).min(hi - x);
    if h > 0.0 {
        let (fl, fr) = (f(x - h)?, f(x + h)?);
        let curvature = fl - 2.0 * fx + fr;
        if curvature < 0.0 {
            let candidate = x + 0.5 * h * (fl - fr) / curvature;
            if (candidate - x).abs() < h && candidate > lo && candidate < hi {
                let fcand = f(candidate)?;
                if fcand > fx {
                    x = candidate;
                }
            }
        }
    }
    Ok(x)
}

fn check_boundary(estimate: f64, interval: (f64, f64)) -> Result<()> {
    if estimate - interval.0 < BOUNDARY_TOL || interval.1 - estimate < BOUNDARY_TOL {
        return Err(Error::OptimizerAtBoundary {
            estimate,
            lower: interval.0,
            upper: interval.1,
        });
    }
    Ok(())
}

/// Full Gaussian log-likelihood of either model at `(beta, param, sigma2)`.
pub fn full_log_likelihood(
    model: SpatialModel,
    design: &DesignMatrix,
    w: &SpatialWeights,
    beta: &DVector<f64>,
    param: f64,
    sigma2: f64,
) -> f64 {
    let n = design.nrows() as f64;
    let y = design.response();
    let x = design.regressors();
    let resid = match model {
        SpatialModel::Sar => y - w.lag(y) * param - x * beta,
        SpatialModel::Sem => {
            let u = y - x * beta;
            &u - w.lag(&u) * param
        }
    };
    -0.5 * n * (2.0 * PI * sigma2).ln() + w.spectrum().log_det(param)
        - resid.norm_squared() / (2.0 * sigma2)
}

/// Central-difference Hessian of `f` at `theta` with per-coordinate steps.
pub(crate) fn numerical_hessian<F: Fn(&[f64]) -> f64>(
    f: F,
    theta: &[f64],
    steps: &[f64],
) -> DMatrix<f64> {
    let p = theta.len();
    let mut h = DMatrix::zeros(p, p);
    let f0 = f(theta);
    let shifted = |i: usize, si: f64, j: usize, sj: f64| {
        let mut t = theta.to_vec();
        t[i] += si;
        t[j] += sj;
        f(&t)
    };
    for i in 0..p {
        let hi = steps[i];
        let plus = shifted(i, hi, i, 0.0);
        let minus = shifted(i, -hi, i, 0.0);
        h[(i, i)] = (plus - 2.0 * f0 + minus) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let v = (shifted(i, hi, j, hj) - shifted(i, hi, j, -hj) - shifted(i, -hi, j, hj)
                + shifted(i, -hi, j, -hj))
                / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Asymptotic standard errors from the inverse of the negative Hessian.
#[allow(clippy::too_many_arguments)]
fn standard_errors(
    model: SpatialModel,
    design: &DesignMatrix,
    w: &SpatialWeights,
    beta: &DVector<f64>,
    param: f64,
    sigma2: f64,
    interval: (f64, f64),
    xtx_inv: &DMatrix<f64>,
) -> (DVector<f64>, f64) {
    let k = beta.len();
    let mut theta: Vec<f64> = beta.iter().copied().collect();
    theta.push(param);
    theta.push(sigma2);
    let mut steps: Vec<f64> = (0..k)
        .map(|j| 1e-3 * (sigma2 * xtx_inv[(j, j)]).sqrt().max(1e-12))
        .collect();
    steps.push(1e-5 * (interval.1 - interval.0));
    steps.push(1e-3 * sigma2);
    let hessian = numerical_hessian(
        |t| {
            let b = DVector::from_column_slice(&t[..k]);
            full_log_likelihood(model, design, w, &b, t[k], t[k + 1])
        },
        &theta,
        &steps,
    );
    let info = -hessian;
    match info.try_inverse() {
        Some(cov) => {
            let se = |i: usize| {
                let v = cov[(i, i)];
                if v > 0.0 {
                    v.sqrt()
                } else {
                    f64::NAN
                }
            };
            (DVector::from_fn(k, |i, _| se(i)), se(k))
        }
        None => (DVector::from_element(k, f64::NAN), f64::NAN),
    }
}

/// Spatial lag model by concentrated maximum likelihood.
pub fn ml_sar(design: &DesignMatrix, w: &SpatialWeights) -> Result<SpatialFit> {
    let interval = w.spectrum().admissible_interval()?;
    let lik = SarLikelihood::new(design, w)?;
    let rho = maximize_scalar(|r| Ok(lik.value(r)), interval.0, interval.1)?;
    check_boundary(rho, interval)?;
    let beta = lik.coefficients(rho);
    let sigma2 = lik.sigma2(rho);
    let xtx_inv = least_squares(
        design.regressors(),
        design.response(),
        design.column_names(),
    )?
    .xtx_inv;
    let (coefficient_std_errors, rho_se) = standard_errors(
        SpatialModel::Sar,
        design,
        w,
        &beta,
        rho,
        sigma2,
        interval,
        &xtx_inv,
    );
    let y = design.response();
    let residuals = y - w.lag(y) * rho - design.regressors() * &beta;
    Ok(SpatialFit {
        model: SpatialModel::Sar,
        rho_or_lambda: rho,
        rho_or_lambda_std_error: rho_se,
        column_names: design.column_names().to_vec(),
        coefficients: beta,
        coefficient_std_errors,
        sigma2,
        log_likelihood: lik.value(rho),
        interval,
        residuals,
    })
}

/// Spatial error model by concentrated maximum likelihood.
pub fn ml_sem(design: &DesignMatrix, w: &SpatialWeights) -> Result<SpatialFit> {
    let interval = w.spectrum().admissible_interval()?;
    let lik = SemLikelihood::new(design, w)?;
    let lambda = maximize_scalar(|l| lik.value(l), interval.0, interval.1)?;
    check_boundary(lambda, interval)?;
    let (beta, sigma2) = lik.filtered_fit(lambda)?;
    let xf = design.regressors() - w.matrix() * design.regressors() * lambda;
    let xtx_inv = least_squares(&xf, design.response(), design.column_names())?.xtx_inv;
    let (coefficient_std_errors, lambda_se) = standard_errors(
        SpatialModel::Sem,
        design,
        w,
        &beta,
        lambda,
        sigma2,
        interval,
        &xtx_inv,
    );
    let u = design.response() - design.regressors() * &beta;
    let residuals = &u - w.lag(&u) * lambda;
    Ok(SpatialFit {
        model: SpatialModel::Sem,
        rho_or_lambda: lambda,
        rho_or_lambda_std_error: lambda_se,
        column_names: design.column_names().to_vec(),
        coefficients: beta,
        coefficient_std_errors,
        sigma2,
        log_likelihood: lik.value(lambda)?,
        interval,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsq::ols_fit;
    use crate::weights::rook_lattice;

    fn fixture(n_side: usize) -> (DesignMatrix, SpatialWeights) {
        let w = rook_lattice(n_side, n_side)
            .unwrap()
            .row_standardize()
            .weights;
        let n = n_side * n_side;
        let x = DMatrix::from_fn(n, 2, |i, j| {
            if j == 0 {
                1.0
            } else {
                ((i * 37 + 11) % 17) as f64 / 17.0
            }
        });
        let y = DVector::from_fn(n, |i, _| {
            0.5 + 2.0 * x[(i, 1)] + (((i * 53 + 7) % 23) as f64 / 23.0 - 0.5)
        });
        let d = DesignMatrix::from_columns(y, x, vec!["intercept".into(), "x".into()]).unwrap();
        (d, w)
    }

    #[test]
    fn likelihood_at_zero_is_ols() {
        let (d, w) = fixture(5);
        let ols = ols_fit(&d).unwrap();
        let sar = SarLikelihood::new(&d, &w).unwrap();
        let sem = SemLikelihood::new(&d, &w).unwrap();
        assert!((sar.value(0.0) - ols.log_likelihood()).abs() < 1e-9);
        assert!((sem.value(0.0).unwrap() - ols.log_likelihood()).abs() < 1e-9);
    }

    #[test]
    fn concentrated_equals_full_at_profiled_parameters() {
        let (d, w) = fixture(5);
        let sar = SarLikelihood::new(&d, &w).unwrap();
        let rho = 0.3;
        let full = full_log_likelihood(
            SpatialModel::Sar,
            &d,
            &w,
            &sar.coefficients(rho),
            rho,
            sar.sigma2(rho),
        );
        assert!((full - sar.value(rho)).abs() < 1e-9);

        let sem = SemLikelihood::new(&d, &w).unwrap();
        let (beta, s2) = sem.filtered_fit(rho).unwrap();
        let full = full_log_likelihood(SpatialModel::Sem, &d, &w, &beta, rho, s2);
        assert!((full - sem.value(rho).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn golden_section_finds_quadratic_peak() {
        let x = maximize_scalar(|x| Ok(-(x - 0.3217).powi(2)), -1.0, 1.0).unwrap();
        assert!((x - 0.3217).abs() < 1e-8);
    }

    #[test]
    fn sar_optimum_is_interior_and_concave() {
        let (d, w) = fixture(6);
        let fit = ml_sar(&d, &w).unwrap();
        let lik = SarLikelihood::new(&d, &w).unwrap();
        let h = 1e-3;
        let r = fit.rho_or_lambda;
        assert!(lik.value(r + h) - 2.0 * lik.value(r) + lik.value(r - h) < 0.0);
        assert!(lik.value(r) >= lik.value(r + 1e-4) && lik.value(r) >= lik.value(r - 1e-4));
        assert!(fit.rho_or_lambda_std_error.is_finite() && fit.rho_or_lambda_std_error > 0.0);
        assert!(fit
            .coefficient_std_errors
            .iter()
            .all(|s| s.is_finite() && *s > 0.0));
    }

    #[test]
    fn boundary_is_reported() {
        assert!(check_boundary(0.5, (-1.0, 1.0)).is_ok());
        assert!(matches!(
            check_boundary(1.0 - 5e-7, (-1.0, 1.0)),
            Err(Error::OptimizerAtBoundary { .. })
        ));
        assert!(check_boundary(-1.0 + 5e-7, (-1.0, 1.0)).is_err());
    }
}
