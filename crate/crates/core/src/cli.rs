//! Command-line front end.
//!
//! Every command computes all of its outputs in memory first and only then
//! writes them, so a failing run leaves nothing behind. Exit codes: 0 on
//! success, 2 for bad input or usage, 3 for numerical failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::dataset::{
    build_migration_variables_with, load_panel_csv, load_regions_csv, regions_to_csv_string,
    to_panel_design, AgriMeasure, Region,
};
use crate::error::{Error, Result};
use crate::lsq::{ols_fit, DesignMatrix};
use crate::panel::{fe_lsdv, hausman_test_with, re_gls};
use crate::report::{diagnostics_table, ols_table, panel_table, render_spec_search, spatial_table};
use crate::simulate::{
    default_weights, monte_carlo_recovery, simulate_panel, synthetic_regions, Estimator, SimConfig,
};
use crate::spatial::{align_weights, diagnose, ml_sar, ml_sem, spec_search};
use crate::weights::{inverse_distance_weights, SpatialWeights};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "netmig",
    version,
    about = "Spatial panel regressions for regional net migration"
)]
pub struct Cli {
    /// Significance level for tests and model choice.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub alpha: f64,
    /// Overrides the master seed of a simulation scenario.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving reports and result files.
    #[arg(long, global = true, default_value = ".")]
    pub output_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate one model and print its table.
    Fit {
        #[arg(value_enum)]
        method: FitMethod,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        weights: WeightsArgs,
        /// Restrict the Hausman comparison to these slopes.
        #[arg(long, value_delimiter = ',')]
        hausman_vars: Option<Vec<String>>,
    },
    /// OLS with the normality, heteroskedasticity and spatial test battery.
    Diagnose {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        weights: WeightsArgs,
    },
    /// Choose between OLS, spatial lag and spatial error models.
    Specsearch {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        weights: WeightsArgs,
    },
    /// Generate a synthetic panel and run a Monte Carlo recovery study.
    Simulate {
        /// Scenario file of `key = value` lines.
        scenario: PathBuf,
        /// Region coordinates; synthetic regions are drawn when omitted.
        #[arg(long)]
        regions: Option<PathBuf>,
        /// Estimator when the scenario does not name one.
        #[arg(long, value_enum)]
        estimator: Option<FitMethod>,
    },
    /// Spatial weights utilities.
    Weights {
        #[command(subcommand)]
        action: WeightsAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum WeightsAction {
    /// Write the inverse-distance weights for a regions file as CSV.
    Export {
        #[arg(long)]
        regions: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        power: f64,
        /// Keep raw inverse distances instead of row-standardizing.
        #[arg(long)]
        raw: bool,
        /// Output file name inside the output directory.
        #[arg(long, default_value = "weights.csv")]
        name: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    Ols,
    Fe,
    Re,
    Sar,
    Sem,
}

impl From<FitMethod> for Estimator {
    fn from(m: FitMethod) -> Self {
        match m {
            FitMethod::Ols => Estimator::Ols,
            FitMethod::Fe => Estimator::Fe,
            FitMethod::Re => Estimator::Re,
            FitMethod::Sar => Estimator::Sar,
            FitMethod::Sem => Estimator::Sem,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Panel CSV.
    #[arg(long)]
    pub panel: PathBuf,
    /// Drop the wage-growth differential.
    #[arg(long)]
    pub no_wages: bool,
    /// Drop the housing-growth differential.
    #[arg(long)]
    pub no_housing: bool,
    /// Use one regression year as a cross-section.
    #[arg(long)]
    pub year: Option<i32>,
    /// Agricultural headcount instead of its employment share.
    #[arg(long)]
    pub agri_headcount: bool,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    /// Regions CSV; builds row-standardized inverse-distance weights.
    #[arg(long, conflicts_with = "weights")]
    pub regions: Option<PathBuf>,
    /// Explicit weights CSV, used as given.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Distance decay exponent for `--regions`.
    #[arg(long, default_value_t = 1.0)]
    pub power: f64,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(stdout) => {
            print!("{stdout}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INPUT
            }
        }
    }
}

/// A file to write once the command has succeeded.
struct Output {
    name: String,
    contents: String,
}

fn execute(cli: &Cli) -> Result<String> {
    if !(cli.alpha > 0.0 && cli.alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "--alpha {} outside (0, 1)",
            cli.alpha
        )));
    }
    let (stdout, outputs) = match &cli.command {
        Command::Fit {
            method,
            data,
            weights,
            hausman_vars,
        } => cmd_fit(*method, data, weights, hausman_vars.as_deref(), cli.alpha)?,
        Command::Diagnose { data, weights } => cmd_diagnose(data, weights, cli.alpha)?,
        Command::Specsearch { data, weights } => cmd_specsearch(data, weights, cli.alpha)?,
        Command::Simulate {
            scenario,
            regions,
            estimator,
        } => cmd_simulate(scenario, regions.as_deref(), *estimator, cli.seed)?,
        Command::Weights {
            action:
                WeightsAction::Export {
                    regions,
                    power,
                    raw,
                    name,
                },
        } => cmd_weights_export(regions, *power, *raw, name)?,
    };
    write_outputs(&cli.output_dir, &outputs)?;
    Ok(stdout)
}

fn write_outputs(dir: &Path, outputs: &[Output]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for o in outputs {
        let path = dir.join(&o.name);
        std::fs::write(&path, &o.contents).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn to_json(value: serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(&value).expect("serializable");
    s.push('\n');
    s
}

fn load_design(data: &DataArgs) -> Result<DesignMatrix> {
    let panel = load_panel_csv(&data.panel)?;
    let agri = if data.agri_headcount {
        AgriMeasure::Headcount
    } else {
        AgriMeasure::Share
    };
    let mut vars = build_migration_variables_with(&panel, agri)?;
    if let Some(year) = data.year {
        vars = vars.select_year(year)?;
    }
    to_panel_design(&vars, !data.no_wages, !data.no_housing)
}

fn load_weights(args: &WeightsArgs, design: &DesignMatrix) -> Result<SpatialWeights> {
    let w = match (&args.regions, &args.weights) {
        (Some(path), _) => {
            let mut ids: Vec<&str> = design
                .row_keys()
                .iter()
                .map(|k| k.region.as_str())
                .collect();
            ids.sort_unstable();
            ids.dedup();
            let all = load_regions_csv(path)?;
            let regions: Vec<Region> = ids
                .iter()
                .map(|id| {
                    all.iter()
                        .find(|r| r.id == *id)
                        .cloned()
                        .ok_or_else(|| Error::UnknownRegion(id.to_string()))
                })
                .collect::<Result<_>>()?;
            inverse_distance_weights(&regions, args.power)?
                .row_standardize()
                .weights
        }
        (None, Some(path)) => SpatialWeights::read_csv(path)?,
        (None, None) => {
            return Err(Error::InvalidInput(
                "spatial commands need --regions or --weights".into(),
            ))
        }
    };
    align_weights(&w, design)
}

fn cmd_fit(
    method: FitMethod,
    data: &DataArgs,
    weights: &WeightsArgs,
    hausman_vars: Option<&[String]>,
    alpha: f64,
) -> Result<(String, Vec<Output>)> {
    let design = load_design(data)?;
    let (text, result) = match method {
        FitMethod::Ols => {
            let fit = ols_fit(&design)?;
            (ols_table(&fit).render(), json!({ "ols": fit }))
        }
        FitMethod::Fe | FitMethod::Re => {
            let (fe, re) = match method {
                FitMethod::Fe => (Some(fe_lsdv(&design)?), re_gls(&design).ok()),
                _ => (fe_lsdv(&design).ok(), Some(re_gls(&design)?)),
            };
            let hausman = match (&fe, &re) {
                (Some(fe), Some(re)) => {
                    let vars: Option<Vec<&str>> =
                        hausman_vars.map(|v| v.iter().map(String::as_str).collect());
                    Some(hausman_test_with(fe, re, vars.as_deref(), alpha)?)
                }
                _ => None,
            };
            let doc = panel_table(
                design.column_names(),
                fe.as_ref(),
                re.as_ref(),
                hausman.as_ref(),
                alpha,
            );
            (
                doc.render(),
                json!({ "fixed_effects": fe, "random_effects": re, "hausman": hausman }),
            )
        }
        FitMethod::Sar | FitMethod::Sem => {
            let w = load_weights(weights, &design)?;
            let fit = if method == FitMethod::Sar {
                ml_sar(&design, &w)?
            } else {
                ml_sem(&design, &w)?
            };
            (spatial_table(&fit).render(), json!({ "spatial": fit }))
        }
    };
    let stem = format!("fit_{}", format!("{method:?}").to_lowercase());
    let sidecar = json!({
        "command": "fit",
        "method": format!("{method:?}").to_lowercase(),
        "columns": design.column_names(),
        "observations": design.nrows(),
        "alpha": alpha,
        "result": result,
    });
    Ok((
        text.clone(),
        vec![
            Output {
                name: format!("{stem}.txt"),
                contents: text,
            },
            Output {
                name: format!("{stem}.json"),
                contents: to_json(sidecar),
            },
        ],
    ))
}

fn cmd_diagnose(
    data: &DataArgs,
    weights: &WeightsArgs,
    alpha: f64,
) -> Result<(String, Vec<Output>)> {
    let design = load_design(data)?;
    let w = load_weights(weights, &design)?;
    let d = diagnose(&design, &w)?;
    let text = diagnostics_table(&d, alpha).render();
    let sidecar = json!({
        "command": "diagnose",
        "columns": design.column_names(),
        "observations": design.nrows(),
        "alpha": alpha,
        "result": d,
    });
    Ok((
        text.clone(),
        vec![
            Output {
                name: "diagnose.txt".into(),
                contents: text,
            },
            Output {
                name: "diagnose.json".into(),
                contents: to_json(sidecar),
            },
        ],
    ))
}

fn cmd_specsearch(
    data: &DataArgs,
    weights: &WeightsArgs,
    alpha: f64,
) -> Result<(String, Vec<Output>)> {
    let design = load_design(data)?;
    let w = load_weights(weights, &design)?;
    let result = spec_search(&design, &w, alpha)?;
    let text = render_spec_search(&result);
    let sidecar = json!({ "command": "specsearch", "result": result });
    Ok((
        text.clone(),
        vec![
            Output {
                name: "specsearch.txt".into(),
                contents: text,
            },
            Output {
                name: "specsearch.json".into(),
                contents: to_json(sidecar),
            },
        ],
    ))
}

fn cmd_simulate(
    scenario: &Path,
    regions_path: Option<&Path>,
    estimator: Option<FitMethod>,
    seed: Option<u64>,
) -> Result<(String, Vec<Output>)> {
    let text = std::fs::read_to_string(scenario).map_err(|e| Error::io(scenario, e))?;
    let (mut config, from_file) = SimConfig::parse(&text)?;
    if let Some(seed) = seed {
        config.master_seed = seed;
    }
    let estimator = estimator
        .map(Estimator::from)
        .or(from_file)
        .unwrap_or(Estimator::Ols);
    let mut outputs = Vec::new();
    let regions = match regions_path {
        Some(p) => {
            let mut r = load_regions_csv(p)?;
            r.truncate(config.n_regions);
            r
        }
        None => {
            let r = synthetic_regions(config.n_regions, config.master_seed);
            outputs.push(Output {
                name: "regions.csv".into(),
                contents: regions_to_csv_string(&r),
            });
            r
        }
    };
    let panel = simulate_panel(&config, &regions)?;
    let w = match estimator {
        Estimator::Sar | Estimator::Sem => Some(default_weights(&regions)?),
        _ => None,
    };
    let summary = monte_carlo_recovery(&config, &regions, w.as_ref(), estimator)?;
    let csv = summary.to_csv_string();
    outputs.push(Output {
        name: "simulated_panel.csv".into(),
        contents: panel.to_csv_string(),
    });
    outputs.push(Output {
        name: "recovery_summary.csv".into(),
        contents: csv.clone(),
    });
    outputs.push(Output {
        name: "simulate.json".into(),
        contents: to_json(json!({ "command": "simulate", "config": config, "summary": summary })),
    });
    Ok((csv, outputs))
}

fn cmd_weights_export(
    regions: &Path,
    power: f64,
    raw: bool,
    name: &str,
) -> Result<(String, Vec<Output>)> {
    let regions = load_regions_csv(regions)?;
    let w = inverse_distance_weights(&regions, power)?;
    let w = if raw { w } else { w.row_standardize().weights };
    let text = format!("wrote {} x {} weights to {name}\n", w.len(), w.len());
    Ok((
        text,
        vec![Output {
            name: name.to_string(),
            contents: w.to_csv_string(),
        }],
    ))
}
