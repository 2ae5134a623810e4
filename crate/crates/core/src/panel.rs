//! Fixed-effects (within / LSDV) and random-effects (Swamy-Arora GLS)
//! estimators for balanced panels, and the Hausman contrast between them.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{least_squares, DesignMatrix};
use crate::stats::{chi2_sf, t_two_sided};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PanelMethod {
    Lsdv,
    Gls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceComponents {
    /// Between-regression residual variance.
    SwamyArora,
    /// Dispersion of the fixed-effect intercepts; used when there are too
    /// few regions to run the between regression.
    FixedEffectDispersion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegionEffects {
    Fixed(Vec<(String, f64)>),
    Random {
        sigma2_u: f64,
        sigma2_e: f64,
        theta: f64,
        /// The raw sigma2_u estimate was negative and set to zero.
        clamped: bool,
        components: VarianceComponents,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelFit {
    pub method: PanelMethod,
    /// LSDV: slopes only. GLS: intercept (if present) plus slopes.
    pub coefficient_names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub std_errors: DVector<f64>,
    pub t_stats: DVector<f64>,
    pub p_values: DVector<f64>,
    pub effects: RegionEffects,
    pub r_squared: Option<f64>,
    pub see: f64,
    pub df: usize,
    pub n_regions: usize,
    pub n_periods: usize,
}

impl PanelFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.coefficient_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }

    pub fn theta(&self) -> Option<f64> {
        match self.effects {
            RegionEffects::Random { theta, .. } => Some(theta),
            RegionEffects::Fixed(_) => None,
        }
    }
}

/// Row indices grouped by region, in first-appearance order.
struct Groups {
    names: Vec<String>,
    members: Vec<Vec<usize>>,
    periods: usize,
}

impl Groups {
    fn of(design: &DesignMatrix) -> Result<Groups> {
        let mut order: Vec<String> = Vec::new();
        let mut map: BTreeMap<&str, usize> = BTreeMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, key) in design.row_keys().iter().enumerate() {
            let g = *map.entry(key.region.as_str()).or_insert_with(|| {
                order.push(key.region.clone());
                members.push(Vec::new());
                members.len() - 1
            });
            members[g].push(i);
        }
        let periods = members[0].len();
        if members.iter().any(|m| m.len() != periods) {
            return Err(Error::InvalidInput("panel design is unbalanced".into()));
        }
        if order.len() < 2 {
            return Err(Error::SingleRegion);
        }
        if periods < 2 {
            return Err(Error::InvalidInput(
                "panel estimators need at least two periods per region".into(),
            ));
        }
        Ok(Groups {
            names: order,
            members,
            periods,
        })
    }

    fn means(&self, v: &DVector<f64>) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| m.iter().map(|&i| v[i]).sum::<f64>() / m.len() as f64)
            .collect()
    }

    /// `v - share * group_mean(v)` for a vector.
    fn quasi_demean(&self, v: &DVector<f64>, share: f64) -> DVector<f64> {
        let means = self.means(v);
        let mut out = v.clone();
        for (g, m) in self.members.iter().enumerate() {
            for &i in m {
                out[i] -= share * means[g];
            }
        }
        out
    }

    fn quasi_demean_columns(&self, x: &DMatrix<f64>, share: f64) -> DMatrix<f64> {
        let mut out = x.clone();
        for j in 0..x.ncols() {
            let col = self.quasi_demean(&x.column(j).into_owned(), share);
            out.set_column(j, &col);
        }
        out
    }

    fn mean_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.members.len(), x.ncols());
        for j in 0..x.ncols() {
            let means = self.means(&x.column(j).into_owned());
            for (g, m) in means.into_iter().enumerate() {
                out[(g, j)] = m;
            }
        }
        out
    }
}

/// Slope columns: every column except a constant intercept.
fn slope_columns(design: &DesignMatrix) -> (Option<usize>, Vec<usize>) {
    let intercept = design.intercept_column();
    let slopes = (0..design.ncols())
        .filter(|&j| Some(j) != intercept)
        .collect();
    (intercept, slopes)
}

fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

fn centered_tss(y: &DVector<f64>) -> f64 {
    let mean = y.mean();
    y.iter().map(|v| (v - mean).powi(2)).sum()
}

struct Within {
    slopes: DVector<f64>,
    xtx_inv: DMatrix<f64>,
    rss: f64,
    df: usize,
}

fn within_fit(design: &DesignMatrix, groups: &Groups, slopes: &[usize]) -> Result<Within> {
    if slopes.is_empty() {
        return Err(Error::InvalidInput(
            "no slope regressors besides the intercept".into(),
        ));
    }
    let names: Vec<String> = slopes
        .iter()
        .map(|&j| design.column_names()[j].clone())
        .collect();
    let x = select_columns(design.regressors(), slopes);
    let xd = groups.quasi_demean_columns(&x, 1.0);
    let constant_within: Vec<String> = (0..slopes.len())
        .filter(|&j| xd.column(j).norm() <= 1e-12 * x.column(j).norm().max(f64::MIN_POSITIVE))
        .map(|j| names[j].clone())
        .collect();
    if !constant_within.is_empty() {
        return Err(Error::RankDeficient {
            columns: constant_within,
        });
    }
    let yd = groups.quasi_demean(design.response(), 1.0);
    let n = design.nrows();
    let n_groups = groups.members.len();
    if n <= slopes.len() + n_groups {
        return Err(Error::InvalidInput(format!(
            "no residual degrees of freedom: n = {n}, slopes = {}, regions = {n_groups}",
            slopes.len()
        )));
    }
    let ls = least_squares(&xd, &yd, &names)?;
    Ok(Within {
        rss: ls.residuals.norm_squared(),
        slopes: ls.coefficients,
        xtx_inv: ls.xtx_inv,
        df: n - slopes.len() - n_groups,
    })
}

fn inference(
    coefficients: &DVector<f64>,
    covariance: &DMatrix<f64>,
    df: usize,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let se = DVector::from_iterator(
        coefficients.len(),
        (0..coefficients.len()).map(|j| covariance[(j, j)].max(0.0).sqrt()),
    );
    let t = coefficients.zip_map(&se, |b, s| b / s);
    let p = t.map(|t| t_two_sided(t, df as f64));
    (se, t, p)
}

/// Fixed-effects estimator via the within transformation. Results equal
/// least squares with one dummy per region.
pub fn fe_lsdv(design: &DesignMatrix) -> Result<PanelFit> {
    let groups = Groups::of(design)?;
    let (_, slopes) = slope_columns(design);
    let within = within_fit(design, &groups, &slopes)?;
    let sigma2 = within.rss / within.df as f64;
    let covariance = &within.xtx_inv * sigma2;
    let (std_errors, t_stats, p_values) = inference(&within.slopes, &covariance, within.df);

    let x = select_columns(design.regressors(), &slopes);
    let y_means = groups.means(design.response());
    let x_means = groups.mean_rows(&x);
    let effects = groups
        .names
        .iter()
        .enumerate()
        .map(|(g, name)| {
            let alpha = y_means[g] - (x_means.row(g) * &within.slopes)[0];
            (name.clone(), alpha)
        })
        .collect();
    let tss = centered_tss(design.response());

    Ok(PanelFit {
        method: PanelMethod::Lsdv,
        coefficient_names: slopes
            .iter()
            .map(|&j| design.column_names()[j].clone())
            .collect(),
        coefficients: within.slopes,
        covariance,
        std_errors,
        t_stats,
        p_values,
        effects: RegionEffects::Fixed(effects),
        r_squared: (tss > 0.0).then(|| 1.0 - within.rss / tss),
        see: sigma2.sqrt(),
        df: within.df,
        n_regions: groups.members.len(),
        n_periods: groups.periods,
    })
}

/// Random-effects feasible GLS with Swamy-Arora variance components.
pub fn re_gls(design: &DesignMatrix) -> Result<PanelFit> {
    let groups = Groups::of(design)?;
    let (_, slopes) = slope_columns(design);
    let within = within_fit(design, &groups, &slopes)?;
    let sigma2_e = within.rss / within.df as f64;
    let t = groups.periods as f64;
    let n_groups = groups.members.len();

    let x_means = groups.mean_rows(design.regressors());
    let y_means = DVector::from_vec(groups.means(design.response()));
    let between = if n_groups > design.ncols() {
        least_squares(&x_means, &y_means, design.column_names())
            .ok()
            .map(|ls| ls.residuals.norm_squared() / (n_groups - design.ncols()) as f64)
    } else {
        None
    };
    let (between_var, components) = match between {
        Some(v) => (v, VarianceComponents::SwamyArora),
        None => {
            let slope_means = select_columns(&x_means, &slopes);
            let u = &y_means - slope_means * &within.slopes;
            let mean = u.mean();
            let var = u.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_groups - 1) as f64;
            (var, VarianceComponents::FixedEffectDispersion)
        }
    };
    let raw_sigma2_u = between_var - sigma2_e / t;
    let clamped = raw_sigma2_u < 0.0;
    let sigma2_u = raw_sigma2_u.max(0.0);
    let theta = if sigma2_e + t * sigma2_u > 0.0 {
        1.0 - (sigma2_e / (sigma2_e + t * sigma2_u)).sqrt()
    } else {
        0.0
    };

    let ys = groups.quasi_demean(design.response(), theta);
    let xs = groups.quasi_demean_columns(design.regressors(), theta);
    let ls = least_squares(&xs, &ys, design.column_names())?;
    let n = design.nrows();
    let k = design.ncols();
    let df = n - k;
    let covariance = &ls.xtx_inv * sigma2_e;
    let (std_errors, t_stats, p_values) = inference(&ls.coefficients, &covariance, df);
    let gls_rss = ls.residuals.norm_squared();
    let raw_residuals = design.response() - design.regressors() * &ls.coefficients;
    let tss = centered_tss(design.response());

    Ok(PanelFit {
        method: PanelMethod::Gls,
        coefficient_names: design.column_names().to_vec(),
        coefficients: ls.coefficients,
        covariance,
        std_errors,
        t_stats,
        p_values,
        effects: RegionEffects::Random {
            sigma2_u,
            sigma2_e,
            theta,
            clamped,
            components,
        },
        r_squared: (tss > 0.0).then(|| (1.0 - raw_residuals.norm_squared() / tss).max(0.0)),
        see: (gls_rss / df as f64).sqrt(),
        df,
        n_regions: n_groups,
        n_periods: groups.periods,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preferred {
    FixedEffects,
    RandomEffects,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HausmanResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub preferred: Preferred,
    /// The covariance difference was not positive definite; a pseudo-inverse was used.
    pub degenerate: bool,
    pub compared: Vec<String>,
}

/// Hausman test on every slope shared by both fits, at the 5% level.
pub fn hausman_test(fe: &PanelFit, re: &PanelFit) -> Result<HausmanResult> {
    hausman_test_with(fe, re, None, 0.05)
}

/// Hausman test restricted to `slopes` (all shared slopes when `None`).
pub fn hausman_test_with(
    fe: &PanelFit,
    re: &PanelFit,
    slopes: Option<&[&str]>,
    alpha: f64,
) -> Result<HausmanResult> {
    let shared: Vec<&String> = fe
        .coefficient_names
        .iter()
        .filter(|n| re.coefficient_names.contains(n))
        .collect();
    let compared: Vec<String> = match slopes {
        Some(list) => {
            for name in list {
                if !shared.iter().any(|s| s == name) {
                    return Err(Error::DimensionMismatch(format!(
                        "slope `{name}` is not present in both fits"
                    )));
                }
            }
            list.iter().map(|s| s.to_string()).collect()
        }
        None => shared.into_iter().cloned().collect(),
    };
    if compared.is_empty() || compared.len() != fe.coefficient_names.len() && slopes.is_none() {
        return Err(Error::DimensionMismatch(
            "fixed- and random-effects fits do not share the same slopes".into(),
        ));
    }
    let pos = |fit: &PanelFit, name: &str| {
        fit.coefficient_names
            .iter()
            .position(|n| n == name)
            .unwrap()
    };
    let fi: Vec<usize> = compared.iter().map(|n| pos(fe, n)).collect();
    let ri: Vec<usize> = compared.iter().map(|n| pos(re, n)).collect();
    let m = compared.len();
    let diff = DVector::from_fn(m, |a, _| fe.coefficients[fi[a]] - re.coefficients[ri[a]]);
    let vdiff = DMatrix::from_fn(m, m, |a, b| {
        fe.covariance[(fi[a], fi[b])] - re.covariance[(ri[a], ri[b])]
    });
    let (statistic, degenerate) = quadratic_form_pinv(&diff, &vdiff);
    let p_value = chi2_sf(statistic, m as f64);
    Ok(HausmanResult {
        statistic,
        df: m,
        p_value,
        preferred: if p_value > alpha {
            Preferred::RandomEffects
        } else {
            Preferred::FixedEffects
        },
        degenerate,
        compared,
    })
}

/// Hausman p-value for a reported statistic.
pub fn hausman_p_value(statistic: f64, df: usize) -> f64 {
    chi2_sf(statistic, df as f64)
}

/// `d' V^+ d` with a Moore-Penrose inverse of the symmetric `V`.
/// The flag is set when `V` is not positive definite.
fn quadratic_form_pinv(d: &DVector<f64>, v: &DMatrix<f64>) -> (f64, bool) {
    let sym = (v + v.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.amax();
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let degenerate = eig.eigenvalues.iter().any(|&l| l <= tol);
    let proj = eig.eigenvectors.transpose() * d;
    let stat = eig
        .eigenvalues
        .iter()
        .zip(proj.iter())
        .filter(|(l, _)| l.abs() > tol)
        .map(|(l, p)| p * p / l)
        .sum();
    (stat, degenerate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsq::RowKey;

    /// Balanced design with an intercept and the given slope columns; rows region-major.
    pub(crate) fn panel_design(y: &[f64], slopes: &[&[f64]], regions: usize) -> DesignMatrix {
        let n = y.len();
        let t = n / regions;
        let mut x = DMatrix::zeros(n, slopes.len() + 1);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for (j, s) in slopes.iter().enumerate() {
                x[(i, j + 1)] = s[i];
            }
        }
        let mut names = vec!["intercept".to_string()];
        names.extend((1..=slopes.len()).map(|j| format!("x{j}")));
        let keys = (0..n)
            .map(|i| RowKey {
                region: format!("R{}", i / t),
                year: (i % t) as i32,
            })
            .collect();
        DesignMatrix::new(DVector::from_column_slice(y), x, names, keys).unwrap()
    }

    #[test]
    fn effects_absorb_region_constants() {
        let x = [0.3, 1.2, -0.4, 2.0, 0.1, 0.9];
        let y = [5.0, 5.0, 5.0, -2.0, -2.0, -2.0];
        let fit = fe_lsdv(&panel_design(&y, &[&x], 2)).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        match &fit.effects {
            RegionEffects::Fixed(e) => {
                assert!((e[0].1 - 5.0).abs() < 1e-12);
                assert!((e[1].1 + 2.0).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn exact_within_slope() {
        let x = [0.3, 1.2, -0.4, 2.0, 0.1, 0.9, 1.5, -1.0, 0.0];
        let alpha = [1.0, -3.0, 0.5];
        let y: Vec<f64> = (0..9).map(|i| 2.0 * x[i] + alpha[i / 3]).collect();
        let fit = fe_lsdv(&panel_design(&y, &[&x], 3)).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert_eq!(fit.df, 9 - 1 - 3);
    }

    #[test]
    fn time_invariant_regressor_is_rank_deficient() {
        let x = [1.0, 1.0, 1.0, 2.0, 2.0, 2.0];
        let y = [0.1, 0.3, 0.2, 0.5, 0.4, 0.6];
        assert!(matches!(
            fe_lsdv(&panel_design(&y, &[&x], 2)),
            Err(Error::RankDeficient { columns }) if columns == vec!["x1".to_string()]
        ));
    }

    #[test]
    fn hausman_zero_difference() {
        let x = [
            0.3, 1.2, -0.4, 2.0, 0.1, 0.9, 1.5, -1.0, 0.0, 0.2, 0.8, -0.6,
        ];
        let y: Vec<f64> = (0..12)
            .map(|i| 1.0 + 0.5 * x[i] + ((i * 7) % 5) as f64 * 0.1)
            .collect();
        let d = panel_design(&y, &[&x], 4);
        let fe = fe_lsdv(&d).unwrap();
        let mut re = re_gls(&d).unwrap();
        re.coefficients[1] = fe.coefficients[0];
        let h = hausman_test(&fe, &re).unwrap();
        assert_eq!(h.statistic, 0.0);
        assert_eq!(h.preferred, Preferred::RandomEffects);
    }

    #[test]
    fn hausman_quadratic_form() {
        let d = DVector::from_vec(vec![1.0, 1.0]);
        let v = DMatrix::identity(2, 2);
        let (h, degenerate) = quadratic_form_pinv(&d, &v);
        assert!((h - 2.0).abs() < 1e-14);
        assert!(!degenerate);

        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let (h, degenerate) = quadratic_form_pinv(&d, &singular);
        assert!((h - 1.0).abs() < 1e-14);
        assert!(degenerate);
    }

    #[test]
    fn hausman_reported_value() {
        let p = hausman_p_value(6.157, 4);
        let closed = (-6.157f64 / 2.0).exp() * (1.0 + 6.157 / 2.0);
        assert!((p - closed).abs() < 1e-12);
        assert!((p - 0.188).abs() < 1e-3);
    }

    #[test]
    fn mismatched_slopes() {
        let x = [0.3, 1.2, -0.4, 2.0, 0.1, 0.9];
        let y = [0.1, 0.3, 0.2, 0.5, 0.4, 0.6];
        let d = panel_design(&y, &[&x], 2);
        let fe = fe_lsdv(&d).unwrap();
        let re = re_gls(&d).unwrap();
        assert!(matches!(
            hausman_test_with(&fe, &re, Some(&["x9"]), 0.05),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
