//! Plain-text estimation tables: coefficients with t-statistics, fit and test columns.
//!
//! Rendering is a pure function of the document: fixed 3-decimal rounding,
//! '.' decimals, space-padded columns and LF line endings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::lsq::{OlsFit, TestStat};
use crate::panel::{HausmanResult, PanelFit, PanelMethod, Preferred};
use crate::spatial::{ChosenModel, Diagnostics, SpatialFit, SpatialModel, SpecSearchResult};

/// `*` for p < 0.05, `**` for 0.05 <= p < 0.10.
pub fn star(p_value: f64) -> &'static str {
    if p_value < 0.05 {
        "*"
    } else if p_value < 0.10 {
        "**"
    } else {
        ""
    }
}

/// Three decimals, never "-0.000".
pub fn fmt3(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn term(name: &str) -> String {
    match name {
        "intercept" => String::new(),
        "r_diff" => "(rI - rE)_t".into(),
        "d_diff" => "(DI - DE)_t".into(),
        "a_share" => "(AI)_t".into(),
        "s_diff" => "(sI - sE)_t".into(),
        "f_diff" => "(fI - fE)_t".into(),
        other => format!("({other})"),
    }
}

/// Model equation with coefficients c0, c1, ... in column order.
pub fn equation_line(names: &[String], spatial: Option<SpatialModel>) -> String {
    let mut parts = Vec::new();
    for (i, name) in names.iter().enumerate() {
        parts.push(format!("c{i}{}", term(name)));
        if i == 0 && spatial == Some(SpatialModel::Sar) {
            parts.push("rho W(SM/PA)".into());
        }
    }
    let mut line = format!("(SM/PA)_t = {}", parts.join(" + "));
    if spatial == Some(SpatialModel::Sem) {
        line.push_str(" + u, u = lambda Wu + e");
    }
    line
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub name: String,
    pub estimate: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

impl CoefficientEntry {
    /// `estimate<star> (t)`, e.g. `-1.913* (-3.153)`.
    pub fn cell(&self) -> String {
        format!(
            "{}{} ({})",
            fmt3(self.estimate),
            star(self.p_value),
            fmt3(self.t_stat)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Coefficient(CoefficientEntry),
    Value(f64),
    Count(usize),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Coefficient(c) => c.cell(),
            Cell::Value(v) => fmt3(*v),
            Cell::Count(n) => n.to_string(),
            Cell::Text(t) => t.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub title: String,
    pub equation: String,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Extra lines printed between the table and the footnotes.
    pub details: Vec<String>,
    pub footnotes: Vec<String>,
}

impl ReportDocument {
    pub fn render(&self) -> String {
        let ncols = self.columns.len() + 1;
        let mut grid: Vec<Vec<String>> = Vec::with_capacity(self.rows.len() + 1);
        let mut header = vec![String::new()];
        header.extend(self.columns.iter().cloned());
        grid.push(header);
        for row in &self.rows {
            let mut line = vec![row.label.clone()];
            line.extend(row.cells.iter().map(Cell::render));
            line.resize(ncols, String::new());
            grid.push(line);
        }
        let widths: Vec<usize> = (0..ncols)
            .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();

        let mut out = String::new();
        writeln!(out, "{}", self.title).unwrap();
        writeln!(out).unwrap();
        writeln!(out, "{}", self.equation).unwrap();
        writeln!(out).unwrap();
        for line in &grid {
            let mut text = String::new();
            for (j, cell) in line.iter().enumerate() {
                if j == 0 {
                    write!(text, "{cell:<w$}", w = widths[0]).unwrap();
                } else {
                    write!(text, "  {cell:>w$}", w = widths[j]).unwrap();
                }
            }
            writeln!(out, "{}", text.trim_end()).unwrap();
        }
        if !self.details.is_empty() {
            writeln!(out).unwrap();
            for d in &self.details {
                writeln!(out, "{d}").unwrap();
            }
        }
        if !self.footnotes.is_empty() {
            writeln!(out).unwrap();
            for f in &self.footnotes {
                writeln!(out, "{f}").unwrap();
            }
        }
        out
    }
}

fn coefficient_columns(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}

fn legend(names: &[String]) -> String {
    let items: Vec<String> = names
        .iter()
        .enumerate()
        .map(|(i, n)| format!("c{i} = {n}"))
        .collect();
    format!("Coefficients: {}.", items.join(", "))
}

fn r2_cell(r2: Option<f64>) -> Cell {
    match r2 {
        Some(v) => Cell::Value(v),
        None => Cell::Text("undefined".into()),
    }
}

const STAR_NOTE: &str =
    "* Coefficient statistically significant at 5%; ** Coefficient statistically significant at 10%. Figures in brackets are the t-statistics.";

fn panel_row(fit: &PanelFit, names: &[String], th: Cell) -> ReportRow {
    let mut cells: Vec<Cell> = names
        .iter()
        .map(
            |n| match fit.coefficient_names.iter().position(|c| c == n) {
                Some(i) => Cell::Coefficient(CoefficientEntry {
                    name: n.clone(),
                    estimate: fit.coefficients[i],
                    t_stat: fit.t_stats[i],
                    p_value: fit.p_values[i],
                }),
                None if n == "intercept" => Cell::Text("(#)".into()),
                None => Cell::Empty,
            },
        )
        .collect();
    cells.push(Cell::Count(fit.df));
    cells.push(r2_cell(fit.r_squared));
    cells.push(Cell::Value(fit.see));
    cells.push(th);
    ReportRow {
        label: match fit.method {
            PanelMethod::Lsdv => "LSDV".into(),
            PanelMethod::Gls => "GLS".into(),
        },
        cells,
    }
}

/// Fixed- and random-effects panel table with the Hausman column.
///
/// `names` is the full design column list (including the intercept). The
/// Hausman statistic sits in the LSDV row as `H (p)`.
pub fn panel_table(
    names: &[String],
    fe: Option<&PanelFit>,
    re: Option<&PanelFit>,
    hausman: Option<&HausmanResult>,
    alpha: f64,
) -> ReportDocument {
    let mut columns = coefficient_columns(names.len());
    columns.extend(["G.L.", "R²", "SEE", "T.H."].map(String::from));
    let th = |h: Option<&HausmanResult>| match h {
        Some(h) => Cell::Text(format!("{} ({})", fmt3(h.statistic), fmt3(h.p_value))),
        None => Cell::Empty,
    };
    let mut rows = Vec::new();
    if let Some(fe) = fe {
        rows.push(panel_row(fe, names, th(hausman)));
    }
    if let Some(re) = re {
        let cell = if fe.is_none() {
            th(hausman)
        } else {
            Cell::Empty
        };
        rows.push(panel_row(re, names, cell));
    }
    let (n_regions, n_periods) = fe
        .or(re)
        .map(|f| (f.n_regions, f.n_periods))
        .unwrap_or((0, 0));

    let mut details = Vec::new();
    if let Some(re) = re {
        if let crate::panel::RegionEffects::Random {
            sigma2_u,
            sigma2_e,
            theta,
            clamped,
            components,
        } = &re.effects
        {
            details.push(format!(
                "GLS variance components ({components:?}): sigma2_u = {sigma2_u:.4e}, sigma2_e = {sigma2_e:.4e}, theta = {}{}",
                fmt3(*theta),
                if *clamped { " (sigma2_u clamped at 0)" } else { "" }
            ));
        }
    }

    let mut footnotes = vec![
        "Note: LSDV, estimation with fixed effects; GLS, estimation with random effects; G.L., degrees of freedom; SEE, standard error of the estimate; T.H., Hausman test (p-value in brackets); (#), region dummies, not reported.".to_string(),
        STAR_NOTE.to_string(),
        legend(names),
    ];
    match hausman {
        Some(h) => footnotes.push(format!(
            "Hausman test: H = {} with {} df (compared: {}), p = {}; {} effects preferred at {}%{}.",
            fmt3(h.statistic),
            h.df,
            h.compared.join(", "),
            fmt3(h.p_value),
            match h.preferred {
                Preferred::FixedEffects => "fixed",
                Preferred::RandomEffects => "random",
            },
            alpha * 100.0,
            if h.degenerate {
                "; covariance difference not positive definite, pseudo-inverse used"
            } else {
                ""
            }
        )),
        None => footnotes.push("Hausman test: not available.".into()),
    }
    ReportDocument {
        title: format!(
            "Panel estimates of net migration: {n_regions} regions, {n_periods} periods"
        ),
        equation: equation_line(names, None),
        columns,
        rows,
        details,
        footnotes,
    }
}

fn ols_cells(fit: &OlsFit) -> Vec<Cell> {
    (0..fit.coefficients.len())
        .map(|i| {
            Cell::Coefficient(CoefficientEntry {
                name: fit.column_names[i].clone(),
                estimate: fit.coefficients[i],
                t_stat: fit.t_stats[i],
                p_value: fit.p_values[i],
            })
        })
        .collect()
}

pub fn ols_table(fit: &OlsFit) -> ReportDocument {
    let mut columns = coefficient_columns(fit.column_names.len());
    columns.extend(["G.L.", "R²", "SEE"].map(String::from));
    let mut cells = ols_cells(fit);
    cells.push(Cell::Count(fit.df));
    cells.push(r2_cell(fit.r_squared));
    cells.push(Cell::Value(fit.see));
    ReportDocument {
        title: format!(
            "OLS estimates of net migration: {} observations",
            fit.nobs()
        ),
        equation: equation_line(&fit.column_names, None),
        columns,
        rows: vec![ReportRow {
            label: "OLS".into(),
            cells,
        }],
        details: Vec::new(),
        footnotes: vec![
            "Note: G.L., degrees of freedom; SEE, standard error of the estimate.".into(),
            STAR_NOTE.into(),
            legend(&fit.column_names),
        ],
    }
}

pub fn spatial_table(fit: &SpatialFit) -> ReportDocument {
    let (label, param) = match fit.model {
        SpatialModel::Sar => ("SAR", "rho"),
        SpatialModel::Sem => ("SEM", "lambda"),
    };
    let mut columns = coefficient_columns(fit.column_names.len());
    columns.extend([param, "logL", "sigma2"].map(String::from));
    let entry = |name: &str, b: f64, se: f64| {
        let z = b / se;
        Cell::Coefficient(CoefficientEntry {
            name: name.into(),
            estimate: b,
            t_stat: z,
            p_value: crate::stats::normal_two_sided(z),
        })
    };
    let mut cells: Vec<Cell> = (0..fit.coefficients.len())
        .map(|i| {
            entry(
                &fit.column_names[i],
                fit.coefficients[i],
                fit.coefficient_std_errors[i],
            )
        })
        .collect();
    cells.push(entry(param, fit.rho_or_lambda, fit.rho_or_lambda_std_error));
    cells.push(Cell::Value(fit.log_likelihood));
    cells.push(Cell::Value(fit.sigma2));
    ReportDocument {
        title: format!(
            "Maximum-likelihood {label} estimates of net migration: {} observations",
            fit.residuals.len()
        ),
        equation: equation_line(&fit.column_names, Some(fit.model)),
        columns,
        rows: vec![ReportRow {
            label: label.into(),
            cells,
        }],
        details: vec![format!(
            "Admissible interval for {param}: ({}, {})",
            fmt3(fit.interval.0),
            fmt3(fit.interval.1)
        )],
        footnotes: vec![
            "Note: z-statistics from the numerical Hessian in brackets; logL, maximized log-likelihood.".into(),
            STAR_NOTE.into(),
            legend(&fit.column_names),
        ],
    }
}

fn test_line(t: &TestStat, alpha: f64) -> String {
    let df =
        t.df.map(|d| format!("chi2({d})"))
            .unwrap_or_else(|| "N(0,1)".into());
    format!(
        "{:<8} {:>10}  {:<8} p = {}  {}",
        t.name,
        fmt3(t.statistic),
        df,
        fmt3(t.p_value),
        if t.rejects_at(alpha) {
            "reject"
        } else {
            "retain"
        }
    )
}

/// Cross-section OLS with the residual battery, in the order
/// JB, BP, KB, M'I, LM_l, LMR_l, LM_e, LMR_e.
pub fn diagnostics_table(d: &Diagnostics, alpha: f64) -> ReportDocument {
    let fit = &d.fit;
    let mut columns = coefficient_columns(fit.column_names.len());
    columns.extend(
        [
            "JB", "BP", "KB", "M'I", "LM_l", "LMR_l", "LM_e", "LMR_e", "R²", "SEE",
        ]
        .map(String::from),
    );
    let mut cells = ols_cells(fit);
    for v in [
        d.jarque_bera.statistic,
        d.breusch_pagan.statistic,
        d.koenker_bassett.statistic,
        d.moran.i_value,
        d.lm_lag.statistic,
        d.robust_lm_lag.statistic,
        d.lm_error.statistic,
        d.robust_lm_error.statistic,
    ] {
        cells.push(Cell::Value(v));
    }
    cells.push(r2_cell(fit.r_squared));
    cells.push(Cell::Value(fit.see));

    let mut details = vec![format!("Tests at {}%:", alpha * 100.0)];
    for t in [&d.jarque_bera, &d.breusch_pagan, &d.koenker_bassett] {
        details.push(test_line(t, alpha));
    }
    details.push(format!(
        "{:<8} {:>10}  E[I] = {}, Var[I] = {}, z = {}, p = {}  {}",
        "Moran_I",
        fmt3(d.moran.i_value),
        fmt3(d.moran.expected_i),
        fmt3(d.moran.variance_i),
        fmt3(d.moran.z_score),
        fmt3(d.moran.p_value),
        if d.moran.p_value < alpha {
            "reject"
        } else {
            "retain"
        }
    ));
    for t in [&d.lm_lag, &d.robust_lm_lag, &d.lm_error, &d.robust_lm_error] {
        details.push(test_line(t, alpha));
    }
    ReportDocument {
        title: format!(
            "OLS estimates with spatial diagnostics: {} observations",
            fit.nobs()
        ),
        equation: equation_line(&fit.column_names, Some(SpatialModel::Sar)),
        columns,
        rows: vec![ReportRow {
            label: "OLS".into(),
            cells,
        }],
        details,
        footnotes: vec![
            "Note: JB, Jarque-Bera normality test; BP, Breusch-Pagan heteroscedasticity test; KB, Koenker-Bassett heteroscedasticity test; M'I, Moran's I of the residuals; LM_l, LMR_l, LM and robust LM tests for a spatial lag; LM_e, LMR_e, LM and robust LM tests for spatial error; SEE, standard error of the estimate.".into(),
            STAR_NOTE.into(),
            legend(&fit.column_names),
        ],
    }
}

/// The specification search trail and decision as plain text.
pub fn render_spec_search(result: &SpecSearchResult) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "Specification search at {}%",
        result.significance_level * 100.0
    )
    .unwrap();
    writeln!(out).unwrap();
    for t in &result.trail {
        writeln!(out, "{}", test_line(t, result.significance_level)).unwrap();
    }
    writeln!(out).unwrap();
    for s in &result.steps {
        writeln!(out, "{s}").unwrap();
    }
    writeln!(out).unwrap();
    let what = match result.chosen {
        ChosenModel::Ols => "no spatial dependence; keep OLS",
        ChosenModel::Sar => "spatial lag model",
        ChosenModel::Sem => "spatial error model",
    };
    writeln!(out, "Chosen: {} ({what})", result.chosen).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stars_follow_table_note() {
        assert_eq!(star(0.01), "*");
        assert_eq!(star(0.049), "*");
        assert_eq!(star(0.05), "**");
        assert_eq!(star(0.0999), "**");
        assert_eq!(star(0.10), "");
    }

    #[test]
    fn three_decimals() {
        assert_eq!(fmt3(-1.9134), "-1.913");
        assert_eq!(fmt3(-0.0001), "0.000");
        assert_eq!(fmt3(6.1574), "6.157");
    }

    #[test]
    fn coefficient_cell() {
        let c = CoefficientEntry {
            name: "a_share".into(),
            estimate: -1.913,
            t_stat: -3.153,
            p_value: 0.003,
        };
        assert_eq!(c.cell(), "-1.913* (-3.153)");
    }

    #[test]
    fn equation_mentions_every_column() {
        let names: Vec<String> = ["intercept", "r_diff", "d_diff", "a_share", "f_diff"]
            .map(String::from)
            .to_vec();
        assert_eq!(
            equation_line(&names, None),
            "(SM/PA)_t = c0 + c1(rI - rE)_t + c2(DI - DE)_t + c3(AI)_t + c4(fI - fE)_t"
        );
    }

    #[test]
    fn rendering_is_aligned_and_lf_only() {
        let doc = ReportDocument {
            title: "t".into(),
            equation: "e".into(),
            columns: vec!["c0".into(), "R²".into()],
            rows: vec![ReportRow {
                label: "OLS".into(),
                cells: vec![Cell::Value(1.0), Cell::Text("undefined".into())],
            }],
            details: vec![],
            footnotes: vec!["n".into()],
        };
        let text = doc.render();
        assert!(!text.contains('\r'));
        assert_eq!(
            text,
            "t\n\ne\n\n        c0         R²\nOLS  1.000  undefined\n\nn\n"
        );
    }
}
