//! Synthetic regional panels and the Monte Carlo recovery harness.
//!
//! Every draw comes from a ChaCha stream keyed by `(master_seed, replication)`,
//! so replication `r` can be regenerated on its own and the harness gives the
//! same summary regardless of thread scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    build_migration_variables, to_panel_design, NutsLevel, Observation, PanelDataset, Region,
};
use crate::error::{Error, Result};
use crate::lsq::{ols_fit, DesignMatrix, RowKey};
use crate::panel::{fe_lsdv, re_gls};
use crate::spatial::{align_weights, ml_sar, ml_sem};
use crate::stats::normal_upper_quantile;
use crate::weights::{inverse_distance_weights, SpatialWeights};

pub const DESIGN_NAMES: [&str; 6] = [
    "intercept",
    "r_diff",
    "d_diff",
    "a_share",
    "s_diff",
    "f_diff",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_regions: usize,
    /// Regression periods; the generated panel has one extra leading year.
    pub n_periods: usize,
    /// `[c0, c1, c2, c3, c4, c5]` with wages, `[c0, c1, c2, c3, c4]` without.
    pub true_coefficients: Vec<f64>,
    pub include_wage: bool,
    pub sigma_e: f64,
    pub sigma_u: f64,
    pub rho: f64,
    pub lambda: f64,
    pub master_seed: u64,
    pub replications: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_regions: 20,
            n_periods: 10,
            true_coefficients: vec![0.148, 0.310, -0.020, -1.913, -0.078, 0.247],
            include_wage: true,
            sigma_e: 0.01,
            sigma_u: 0.0,
            rho: 0.0,
            lambda: 0.0,
            master_seed: 20_070_101,
            replications: 200,
        }
    }
}

impl SimConfig {
    pub fn coefficient_names(&self) -> Vec<&'static str> {
        DESIGN_NAMES
            .iter()
            .copied()
            .filter(|n| self.include_wage || *n != "s_diff")
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Scenario {
                key: key.into(),
                message: message.into(),
            })
        };
        if self.n_regions < 2 {
            return bad("n_regions", "at least two regions are required");
        }
        if self.n_periods < 1 {
            return bad("n_periods", "at least one regression period is required");
        }
        if self.true_coefficients.len() != self.coefficient_names().len() {
            return bad(
                "true_coefficients",
                &format!(
                    "expected {} values ({})",
                    self.coefficient_names().len(),
                    self.coefficient_names().join(", ")
                ),
            );
        }
        if self.sigma_e.is_nan() || self.sigma_e < 0.0 {
            return bad("sigma_e", "must be nonnegative");
        }
        if self.sigma_u.is_nan() || self.sigma_u < 0.0 {
            return bad("sigma_u", "must be nonnegative");
        }
        if self.rho != 0.0 && self.lambda != 0.0 {
            return bad("lambda", "rho and lambda cannot both be nonzero");
        }
        if self.replications < 1 {
            return bad("replications", "must be at least 1");
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<(SimConfig, Option<Estimator>)> {
        let mut cfg = SimConfig::default();
        let mut estimator = None;
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Scenario {
                key: line.to_string(),
                message: format!("line {} is not `key = value`", lineno + 1),
            })?;
            let key = key.trim();
            let value = value.trim();
            if seen.insert(key.to_string(), lineno).is_some() {
                return Err(Error::Scenario {
                    key: key.into(),
                    message: "duplicate key".into(),
                });
            }
            let err = |m: String| Error::Scenario {
                key: key.to_string(),
                message: m,
            };
            fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
            where
                T::Err: std::fmt::Display,
            {
                v.parse::<T>()
                    .map_err(|e| format!("cannot parse `{v}`: {e}"))
            }
            match key {
                "n_regions" => cfg.n_regions = num(value).map_err(err)?,
                "n_periods" => cfg.n_periods = num(value).map_err(err)?,
                "true_coefficients" => {
                    cfg.true_coefficients = value
                        .split(',')
                        .map(|v| num::<f64>(v.trim()))
                        .collect::<std::result::Result<_, _>>()
                        .map_err(err)?
                }
                "include_wage" => cfg.include_wage = num(value).map_err(err)?,
                "sigma_e" => cfg.sigma_e = num(value).map_err(err)?,
                "sigma_u" => cfg.sigma_u = num(value).map_err(err)?,
                "rho" => cfg.rho = num(value).map_err(err)?,
                "lambda" => cfg.lambda = num(value).map_err(err)?,
                "master_seed" => cfg.master_seed = num(value).map_err(err)?,
                "replications" => cfg.replications = num(value).map_err(err)?,
                "estimator" => estimator = Some(value.parse::<Estimator>().map_err(err)?),
                _ => {
                    return Err(Error::Scenario {
                        key: key.into(),
                        message: "unknown key".into(),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok((cfg, estimator))
    }
}

/// RNG for replication `replication` of a run seeded with `master_seed`.
pub fn replication_rng(master_seed: u64, replication: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(replication);
    rng
}

/// Regions scattered over mainland-Portugal-like coordinates.
pub fn synthetic_regions(n: usize, seed: u64) -> Vec<Region> {
    let mut rng = replication_rng(seed, u64::MAX);
    let lat = Uniform::new(37.0, 42.0);
    let lon = Uniform::new(-9.5, -6.2);
    (0..n)
        .map(|i| {
            Region::new(
                format!("R{:03}", i + 1),
                format!("Region {}", i + 1),
                NutsLevel::III,
                lat.sample(&mut rng),
                lon.sample(&mut rng),
            )
            .expect("coordinates drawn inside valid range")
        })
        .collect()
}

/// A generated panel plus the regressors it was built to reproduce.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: PanelDataset,
    /// Full six-column regressor matrix (wages included), region-major over the regression periods.
    pub regressors: DMatrix<f64>,
    pub sm_pa: DVector<f64>,
}

fn own_minus_others(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let total: f64 = v.iter().sum();
    v.iter().map(|&x| (n * x - total) / (n - 1.0)).collect()
}

fn solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::SingularSystem("I - rho W is singular".into()))
}

/// Default weights for a simulated panel: row-standardized inverse distance.
pub fn default_weights(regions: &[Region]) -> Result<SpatialWeights> {
    Ok(inverse_distance_weights(regions, 1.0)?
        .row_standardize()
        .weights)
}

pub fn simulate_panel(config: &SimConfig, regions: &[Region]) -> Result<PanelDataset> {
    let w = if config.rho != 0.0 || config.lambda != 0.0 {
        Some(default_weights(regions)?)
    } else {
        None
    };
    let mut rng = replication_rng(config.master_seed, 0);
    Ok(generate_panel(config, regions, w.as_ref(), &mut rng)?.panel)
}

/// Draws exogenous series, composes net migration from the structural
/// equation and writes raw columns that reproduce the regressors exactly.
pub fn generate_panel<R: Rng>(
    config: &SimConfig,
    regions: &[Region],
    w: Option<&SpatialWeights>,
    rng: &mut R,
) -> Result<SimulatedPanel> {
    config.validate()?;
    let n = config.n_regions;
    if regions.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} regions supplied for n_regions = {n}",
            regions.len()
        )));
    }
    let spatial = config.rho != 0.0 || config.lambda != 0.0;
    let w = match (spatial, w) {
        (true, Some(w)) => {
            let order: Vec<String> = regions.iter().map(|r| r.id.clone()).collect();
            Some(w.reorder(&order)?)
        }
        (true, None) => Some(default_weights(regions)?),
        (false, _) => None,
    };
    let t_periods = config.n_periods;
    let years = t_periods + 1;

    let normal = |m: f64, s: f64| Normal::new(m, s).expect("valid normal");
    let lognormal = |m: f64, s: f64| LogNormal::new(m, s).expect("valid lognormal");
    let output_growth = normal(0.025, 0.02);
    let wage_growth = normal(0.03, 0.015);
    let housing_growth = normal(0.015, 0.01);
    let pop_growth = normal(0.005, 0.005);
    let unemployment = Uniform::new(0.03, 0.15);
    let agri_share = Uniform::new(0.03, 0.25);
    let noise = normal(0.0, 1.0);

    // levels[r][t]
    let mut output = vec![vec![0.0; years]; n];
    let mut wages = vec![vec![0.0; years]; n];
    let mut housing = vec![vec![0.0; years]; n];
    let mut active = vec![vec![0.0; years]; n];
    let mut unemp = vec![vec![0.0; years]; n];
    let mut agri = vec![vec![0.0; years]; n];
    let mut growth = vec![vec![[0.0f64; 3]; t_periods]; n];
    for r in 0..n {
        output[r][0] = lognormal(5000f64.ln(), 0.5).sample(rng);
        wages[r][0] = 100.0 * lognormal(0.0, 0.1).sample(rng);
        housing[r][0] = lognormal(80_000f64.ln(), 0.5).sample(rng);
        active[r][0] = lognormal(200_000f64.ln(), 0.5).sample(rng);
        unemp[r][0] = unemployment.sample(rng);
        agri[r][0] = agri_share.sample(rng);
        for t in 1..years {
            let g = [
                output_growth.sample(rng),
                wage_growth.sample(rng),
                housing_growth.sample(rng),
            ];
            let gp = pop_growth.sample(rng);
            if g.iter().chain(std::iter::once(&gp)).any(|&x| x <= -1.0) {
                return Err(Error::InfeasibleBackSolve(
                    "drawn growth rate at or below -100%".into(),
                ));
            }
            output[r][t] = output[r][t - 1] * (1.0 + g[0]);
            wages[r][t] = wages[r][t - 1] * (1.0 + g[1]);
            housing[r][t] = housing[r][t - 1] * (1.0 + g[2]);
            active[r][t] = active[r][t - 1] * (1.0 + gp);
            unemp[r][t] = unemployment.sample(rng);
            agri[r][t] = agri_share.sample(rng);
            growth[r][t - 1] = g;
        }
    }

    // intended regressors computed from the drawn rates, not the stored levels
    let rows = n * t_periods;
    let mut x = DMatrix::zeros(rows, 6);
    for t in 0..t_periods {
        let col = |k: usize| own_minus_others(&(0..n).map(|r| growth[r][t][k]).collect::<Vec<_>>());
        let (r_diff, s_diff, f_diff) = (col(0), col(1), col(2));
        let d_diff = own_minus_others(&(0..n).map(|r| unemp[r][t + 1]).collect::<Vec<_>>());
        for r in 0..n {
            let i = r * t_periods + t;
            x[(i, 0)] = 1.0;
            x[(i, 1)] = r_diff[r];
            x[(i, 2)] = d_diff[r];
            x[(i, 3)] = agri[r][t + 1];
            x[(i, 4)] = s_diff[r];
            x[(i, 5)] = f_diff[r];
        }
    }
    let beta_full: Vec<f64> = if config.include_wage {
        config.true_coefficients.clone()
    } else {
        let c = &config.true_coefficients;
        vec![c[0], c[1], c[2], c[3], 0.0, c[4]]
    };
    let beta = DVector::from_vec(beta_full);
    let effects: Vec<f64> = (0..n).map(|_| config.sigma_u * noise.sample(rng)).collect();

    let mut sm_pa = DVector::zeros(rows);
    for t in 0..t_periods {
        let idx: Vec<usize> = (0..n).map(|r| r * t_periods + t).collect();
        let mean = DVector::from_fn(n, |r, _| (x.row(idx[r]) * &beta)[0] + effects[r]);
        let eps = DVector::from_fn(n, |_, _| config.sigma_e * noise.sample(rng));
        let y = match &w {
            Some(w) if config.rho != 0.0 => solve(
                DMatrix::identity(n, n) - w.matrix() * config.rho,
                &(mean + eps),
            )?,
            Some(w) => mean + solve(DMatrix::identity(n, n) - w.matrix() * config.lambda, &eps)?,
            None => mean + eps,
        };
        for r in 0..n {
            sm_pa[idx[r]] = y[r];
        }
    }

    let mut observations = Vec::with_capacity(n * years);
    for r in 0..n {
        for t in 0..years {
            let total_employment = active[r][t] * (1.0 - unemp[r][t]);
            let net = if t == 0 {
                0.0
            } else {
                sm_pa[r * t_periods + t - 1] * active[r][t]
            };
            observations.push(Observation {
                net_migration: net,
                active_pop: active[r][t],
                real_output: output[r][t],
                unemployment_rate: unemp[r][t],
                agri_employment: agri[r][t] * total_employment,
                total_employment,
                wage_index: wages[r][t],
                housing_stock: housing[r][t],
            });
        }
    }
    let first_year = 2000;
    let panel = PanelDataset::new(
        regions.iter().map(|r| r.id.clone()).collect(),
        (0..years as i32).map(|t| first_year + t).collect(),
        observations,
    )
    .map_err(|e| Error::InfeasibleBackSolve(e.to_string()))?;
    Ok(SimulatedPanel {
        panel,
        regressors: x,
        sm_pa,
    })
}

/// Cross-section from the spatial lag process `y = (I - rho W)^-1 (X b + e)`,
/// with X an intercept plus standard-normal columns.
pub fn simulate_sar_cross_section(
    w: &SpatialWeights,
    rho: f64,
    beta: &[f64],
    sigma: f64,
    seed: u64,
) -> Result<DesignMatrix> {
    simulate_cross_section(w, rho, 0.0, beta, sigma, seed)
}

/// Cross-section from the spatial error process `y = X b + (I - lambda W)^-1 e`.
pub fn simulate_sem_cross_section(
    w: &SpatialWeights,
    lambda: f64,
    beta: &[f64],
    sigma: f64,
    seed: u64,
) -> Result<DesignMatrix> {
    simulate_cross_section(w, 0.0, lambda, beta, sigma, seed)
}

fn simulate_cross_section(
    w: &SpatialWeights,
    rho: f64,
    lambda: f64,
    beta: &[f64],
    sigma: f64,
    seed: u64,
) -> Result<DesignMatrix> {
    let n = w.len();
    let k = beta.len();
    if k == 0 {
        return Err(Error::InvalidInput(
            "at least one coefficient is required".into(),
        ));
    }
    let param = if rho != 0.0 { rho } else { lambda };
    if param != 0.0 {
        let (lo, hi) = w.spectrum().admissible_interval()?;
        if !(param > lo && param < hi) {
            return Err(Error::InvalidInput(format!(
                "spatial parameter {param} outside ({lo}, {hi})"
            )));
        }
    }
    let mut rng = replication_rng(seed, 0);
    let x = DMatrix::from_fn(n, k, |_, j| {
        if j == 0 {
            1.0
        } else {
            StandardNormal.sample(&mut rng)
        }
    });
    let eps = DVector::from_fn(n, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
    let mean = &x * DVector::from_column_slice(beta);
    let a = |p: f64| DMatrix::identity(n, n) - w.matrix() * p;
    let y = if rho != 0.0 {
        solve(a(rho), &(mean + eps))?
    } else if lambda != 0.0 {
        mean + solve(a(lambda), &eps)?
    } else {
        mean + eps
    };
    let mut names = vec!["intercept".to_string()];
    names.extend((1..k).map(|j| format!("x{j}")));
    let keys = w
        .region_order()
        .iter()
        .map(|r| RowKey {
            region: r.clone(),
            year: 0,
        })
        .collect();
    DesignMatrix::new(y, x, names, keys)
}

/// Balanced panel `y_it = b0 + b' x_it + u_i + e_it` with standard-normal regressors.
pub fn simulate_generic_panel(
    n_regions: usize,
    n_periods: usize,
    beta: &[f64],
    sigma_u: f64,
    sigma_e: f64,
    seed: u64,
) -> Result<DesignMatrix> {
    let n = n_regions * n_periods;
    let k = beta.len();
    let mut rng = replication_rng(seed, 0);
    let x = DMatrix::from_fn(n, k, |_, j| {
        if j == 0 {
            1.0
        } else {
            StandardNormal.sample(&mut rng)
        }
    });
    let u: Vec<f64> = (0..n_regions)
        .map(|_| sigma_u * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let y = &x * DVector::from_column_slice(beta)
        + DVector::from_fn(n, |i, _| {
            u[i / n_periods] + sigma_e * rng.sample::<f64, _>(StandardNormal)
        });
    let mut names = vec!["intercept".to_string()];
    names.extend((1..k).map(|j| format!("x{j}")));
    let keys = (0..n)
        .map(|i| RowKey {
            region: format!("R{:03}", i / n_periods),
            year: (i % n_periods) as i32,
        })
        .collect();
    DesignMatrix::new(y, x, names, keys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    Ols,
    Fe,
    Re,
    Sar,
    Sem,
}

impl std::str::FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ols" => Ok(Estimator::Ols),
            "fe" | "lsdv" => Ok(Estimator::Fe),
            "re" | "gls" => Ok(Estimator::Re),
            "sar" | "lag" => Ok(Estimator::Sar),
            "sem" | "error" => Ok(Estimator::Sem),
            other => Err(format!("unknown estimator `{other}`")),
        }
    }
}

/// How replication seeds are derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedScheme {
    /// Replication `r` uses stream `r`.
    Split,
    /// Every replication reuses stream 0.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Standard deviation of the estimates divided by sqrt(successes).
    pub mc_std_error: f64,
    /// Share of replications whose 95% interval covers the truth.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub estimator: Estimator,
    pub replications: usize,
    pub failures: usize,
    pub parameters: Vec<ParameterSummary>,
}

impl RecoverySummary {
    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "parameter,truth,mean,bias,rmse,mc_std_error,coverage,replications,failures\n",
        );
        for p in &self.parameters {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                p.name,
                p.truth,
                p.mean,
                p.bias,
                p.rmse,
                p.mc_std_error,
                p.coverage,
                self.replications,
                self.failures
            )
            .unwrap();
        }
        out
    }
}

/// Named estimates and standard errors from one replication.
type Estimates = Vec<(String, f64, f64)>;

fn estimate(
    estimator: Estimator,
    design: &DesignMatrix,
    w: Option<&SpatialWeights>,
) -> Result<Estimates> {
    let zip = |names: &[String], b: &DVector<f64>, se: &DVector<f64>| -> Estimates {
        names
            .iter()
            .zip(b.iter().zip(se.iter()))
            .map(|(n, (b, s))| (n.clone(), *b, *s))
            .collect()
    };
    match estimator {
        Estimator::Ols => {
            let fit = ols_fit(design)?;
            Ok(zip(&fit.column_names, &fit.coefficients, &fit.std_errors))
        }
        Estimator::Fe => {
            let fit = fe_lsdv(design)?;
            Ok(zip(
                &fit.coefficient_names,
                &fit.coefficients,
                &fit.std_errors,
            ))
        }
        Estimator::Re => {
            let fit = re_gls(design)?;
            Ok(zip(
                &fit.coefficient_names,
                &fit.coefficients,
                &fit.std_errors,
            ))
        }
        Estimator::Sar | Estimator::Sem => {
            let w =
                w.ok_or_else(|| Error::InvalidInput("spatial estimator needs weights".into()))?;
            let aligned = align_weights(w, design)?;
            let (fit, name) = if estimator == Estimator::Sar {
                (ml_sar(design, &aligned)?, "rho")
            } else {
                (ml_sem(design, &aligned)?, "lambda")
            };
            let mut out = zip(
                &fit.column_names,
                &fit.coefficients,
                &fit.coefficient_std_errors,
            );
            out.push((name.into(), fit.rho_or_lambda, fit.rho_or_lambda_std_error));
            Ok(out)
        }
    }
}

/// Runs `estimator` on `config.replications` simulated panels.
pub fn monte_carlo_recovery(
    config: &SimConfig,
    regions: &[Region],
    weights: Option<&SpatialWeights>,
    estimator: Estimator,
) -> Result<RecoverySummary> {
    monte_carlo_recovery_with(config, regions, weights, estimator, SeedScheme::Split)
}

pub fn monte_carlo_recovery_with(
    config: &SimConfig,
    regions: &[Region],
    weights: Option<&SpatialWeights>,
    estimator: Estimator,
    seeds: SeedScheme,
) -> Result<RecoverySummary> {
    config.validate()?;
    if config.replications < 2 {
        return Err(Error::Scenario {
            key: "replications".into(),
            message: "Monte Carlo needs at least two replications".into(),
        });
    }
    let spatial_estimator = matches!(estimator, Estimator::Sar | Estimator::Sem);
    let owned;
    let w = match weights {
        Some(w) => Some(w),
        None if spatial_estimator || config.rho != 0.0 || config.lambda != 0.0 => {
            owned = default_weights(regions)?;
            Some(&owned)
        }
        None => None,
    };
    // warm the eigenvalue cache once before the parallel section
    if let Some(w) = w {
        if spatial_estimator {
            w.spectrum();
        }
    }

    let outcomes: Vec<Result<Estimates>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let stream = match seeds {
                SeedScheme::Split => r as u64,
                SeedScheme::Fixed => 0,
            };
            let mut rng = replication_rng(config.master_seed, stream);
            let sim = generate_panel(config, regions, w, &mut rng)?;
            let vars = build_migration_variables(&sim.panel)?;
            let design = to_panel_design(&vars, config.include_wage, true)?;
            estimate(estimator, &design, w)
        })
        .collect();

    let mut truths: BTreeMap<String, f64> = config
        .coefficient_names()
        .into_iter()
        .zip(config.true_coefficients.iter())
        .map(|(n, v)| (n.to_string(), *v))
        .collect();
    truths.insert("rho".into(), config.rho);
    truths.insert("lambda".into(), config.lambda);

    let successes: Vec<&Estimates> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let failures = outcomes.len() - successes.len();
    let Some(first) = successes.first() else {
        return Err(outcomes.into_iter().find_map(|o| o.err()).unwrap());
    };
    let z = normal_upper_quantile(0.025);
    let m = successes.len() as f64;
    let parameters = first
        .iter()
        .enumerate()
        .map(|(idx, (name, _, _))| {
            let truth = truths.get(name).copied().unwrap_or(0.0);
            let values: Vec<(f64, f64)> = successes.iter().map(|e| (e[idx].1, e[idx].2)).collect();
            let mean = values.iter().map(|v| v.0).sum::<f64>() / m;
            let var = if m > 1.0 {
                values.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            let rmse = (values.iter().map(|v| (v.0 - truth).powi(2)).sum::<f64>() / m).sqrt();
            let covered = values
                .iter()
                .filter(|(b, se)| se.is_finite() && (b - truth).abs() <= z * se)
                .count();
            ParameterSummary {
                name: name.clone(),
                truth,
                mean,
                bias: mean - truth,
                rmse,
                mc_std_error: (var / m).sqrt(),
                coverage: covered as f64 / m,
            }
        })
        .collect();
    Ok(RecoverySummary {
        estimator,
        replications: config.replications,
        failures,
        parameters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SimConfig {
        SimConfig {
            n_regions: 6,
            n_periods: 3,
            replications: 2,
            ..SimConfig::default()
        }
    }

    #[test]
    fn null_model_has_zero_migration() {
        let cfg = SimConfig {
            true_coefficients: vec![0.0; 6],
            sigma_e: 0.0,
            sigma_u: 0.0,
            ..small_config()
        };
        let regions = synthetic_regions(cfg.n_regions, 1);
        let panel = simulate_panel(&cfg, &regions).unwrap();
        let vars = build_migration_variables(&panel).unwrap();
        assert!(vars.rows().iter().all(|r| r.sm_pa == 0.0));
    }

    #[test]
    fn same_seed_same_panel() {
        let cfg = small_config();
        let regions = synthetic_regions(cfg.n_regions, 1);
        let a = simulate_panel(&cfg, &regions).unwrap();
        let b = simulate_panel(&cfg, &regions).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
    }

    #[test]
    fn rejects_both_spatial_parameters() {
        let cfg = SimConfig {
            rho: 0.3,
            lambda: 0.3,
            ..small_config()
        };
        assert!(matches!(cfg.validate(), Err(Error::Scenario { key, .. }) if key == "lambda"));
    }

    #[test]
    fn scenario_parse() {
        let (cfg, est) = SimConfig::parse(
            "# null scenario\nn_regions = 8\nn_periods=2\ntrue_coefficients = 0,0,0,0,0,0\nestimator = re\n",
        )
        .unwrap();
        assert_eq!(cfg.n_regions, 8);
        assert_eq!(cfg.n_periods, 2);
        assert_eq!(est, Some(Estimator::Re));
        match SimConfig::parse("n_regions = eight\n") {
            Err(Error::Scenario { key, .. }) => assert_eq!(key, "n_regions"),
            other => panic!("{other:?}"),
        }
        match SimConfig::parse("colour = blue\n") {
            Err(Error::Scenario { key, .. }) => assert_eq!(key, "colour"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sar_cross_section_rho_zero_is_linear_model() {
        let w = crate::weights::rook_lattice(4, 4)
            .unwrap()
            .row_standardize()
            .weights;
        let d = simulate_sar_cross_section(&w, 0.0, &[1.0, 2.0], 0.0, 9).unwrap();
        let fitted = d.regressors() * DVector::from_vec(vec![1.0, 2.0]);
        assert!((d.response() - fitted).amax() < 1e-14);
        let again = simulate_sar_cross_section(&w, 0.0, &[1.0, 2.0], 0.0, 9).unwrap();
        assert_eq!(d.response(), again.response());
    }
}
