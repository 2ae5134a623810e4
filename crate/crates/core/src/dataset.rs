//! Regional panel ingestion and construction of the migration regressors.
//!
//! The response is net migration as a share of the active population. The
//! growth-based regressors (output, wages, housing) enter as the region's own
//! proportional growth minus the unweighted mean growth of every other region;
//! unemployment enters as a level differential; agriculture enters as the
//! share of total employment (or headcount, see [`AgriMeasure`]).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{DesignMatrix, RowKey};

pub const PANEL_COLUMNS: [&str; 10] = [
    "region_id",
    "year",
    "net_migration",
    "active_pop",
    "real_output",
    "unemployment_rate",
    "agri_employment",
    "total_employment",
    "wage_index",
    "housing_stock",
];

pub const REGION_COLUMNS: [&str; 5] = ["region_id", "name", "nuts_level", "lat", "lon"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NutsLevel {
    II,
    III,
}

impl std::str::FromStr for NutsLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "II" | "2" => Ok(NutsLevel::II),
            "III" | "3" => Ok(NutsLevel::III),
            other => Err(Error::InvalidInput(format!("unknown NUTS level `{other}`"))),
        }
    }
}

impl std::fmt::Display for NutsLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NutsLevel::II => f.write_str("II"),
            NutsLevel::III => f.write_str("III"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub name: String,
    pub nuts_level: NutsLevel,
    pub latitude: f64,
    pub longitude: f64,
}

impl Region {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        nuts_level: NutsLevel,
        latitude: f64,
        longitude: f64,
    ) -> Result<Self> {
        let id = id.into();
        if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::InvalidInput(format!(
                "region `{id}` has coordinates outside the valid range ({latitude}, {longitude})"
            )));
        }
        Ok(Region {
            id,
            name: name.into(),
            nuts_level,
            latitude,
            longitude,
        })
    }
}

/// Raw values for one region in one year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub net_migration: f64,
    pub active_pop: f64,
    pub real_output: f64,
    pub unemployment_rate: f64,
    pub agri_employment: f64,
    pub total_employment: f64,
    pub wage_index: f64,
    pub housing_stock: f64,
}

/// Balanced region × year table. Observations are stored region-major in
/// ascending (region id, year) order.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    regions: Vec<String>,
    years: Vec<i32>,
    observations: Vec<Observation>,
}

impl PanelDataset {
    /// Builds a dataset from region-major observations (`regions.len() * years.len()` entries).
    pub fn new(
        regions: Vec<String>,
        years: Vec<i32>,
        observations: Vec<Observation>,
    ) -> Result<Self> {
        if regions.is_empty() || years.is_empty() {
            return Err(Error::InvalidInput(
                "panel needs at least one region and one year".into(),
            ));
        }
        if years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "years must be strictly increasing".into(),
            ));
        }
        let unique: BTreeSet<&String> = regions.iter().collect();
        if unique.len() != regions.len() {
            return Err(Error::InvalidInput("duplicate region id".into()));
        }
        if observations.len() != regions.len() * years.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observations for {} regions x {} years",
                observations.len(),
                regions.len(),
                years.len()
            )));
        }
        for (idx, obs) in observations.iter().enumerate() {
            let key = || {
                format!(
                    "({}, {})",
                    regions[idx / years.len()],
                    years[idx % years.len()]
                )
            };
            validate_observation(obs, key)?;
        }
        Ok(PanelDataset {
            regions,
            years,
            observations,
        })
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn observation(&self, region: usize, year: usize) -> &Observation {
        &self.observations[region * self.years.len() + year]
    }

    /// Writes the dataset in the panel CSV schema.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_csv_string().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = PANEL_COLUMNS.join(",");
        out.push('\n');
        for (r, region) in self.regions.iter().enumerate() {
            for (t, year) in self.years.iter().enumerate() {
                let o = self.observation(r, t);
                out.push_str(&format!(
                    "{region},{year},{},{},{},{},{},{},{},{}\n",
                    o.net_migration,
                    o.active_pop,
                    o.real_output,
                    o.unemployment_rate,
                    o.agri_employment,
                    o.total_employment,
                    o.wage_index,
                    o.housing_stock
                ));
            }
        }
        out
    }
}

fn validate_observation(obs: &Observation, key: impl Fn() -> String) -> Result<()> {
    let values = [
        ("net_migration", obs.net_migration),
        ("active_pop", obs.active_pop),
        ("real_output", obs.real_output),
        ("unemployment_rate", obs.unemployment_rate),
        ("agri_employment", obs.agri_employment),
        ("total_employment", obs.total_employment),
        ("wage_index", obs.wage_index),
        ("housing_stock", obs.housing_stock),
    ];
    if let Some((name, _)) = values.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite `{name}` for {}",
            key()
        )));
    }
    for (field, value) in [
        ("active_pop", obs.active_pop),
        ("total_employment", obs.total_employment),
        ("housing_stock", obs.housing_stock),
    ] {
        if value <= 0.0 {
            return Err(Error::NonPositiveDenominator {
                field: field.into(),
                key: key(),
            });
        }
    }
    if !(0.0..=1.0).contains(&obs.unemployment_rate) {
        return Err(Error::InvalidInput(format!(
            "unemployment_rate {} outside [0, 1] for {}",
            obs.unemployment_rate,
            key()
        )));
    }
    Ok(())
}

fn column_indices(headers: &csv::StringRecord, wanted: &[&str]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::MissingColumn((*name).to_string()))
        })
        .collect()
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse::<T>().map_err(|e| Error::Parse {
        line: record_line(record),
        message: format!("column `{name}`: cannot parse `{raw}`: {e}"),
    })
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    match err.kind() {
        csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(err.to_string())),
        _ => Error::Parse {
            line: err.position().map(|p| p.line()).unwrap_or(0),
            message: err.to_string(),
        },
    }
}

/// Loads a balanced panel from CSV, normalizing row order to (region, year).
pub fn load_panel_csv(path: &Path) -> Result<PanelDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_panel_csv(file, path)
}

/// Parses panel CSV text; `origin` is used only in error messages.
pub fn read_panel_csv<R: std::io::Read>(reader: R, origin: &Path) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(origin, e))?.clone();
    let idx = column_indices(&headers, &PANEL_COLUMNS)?;

    let mut cells: BTreeMap<(String, i32), Observation> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(origin, e))?;
        let region: String = parse_field(&record, idx[0], PANEL_COLUMNS[0])?;
        let year: i32 = parse_field(&record, idx[1], PANEL_COLUMNS[1])?;
        let mut values = [0.0f64; 8];
        for (slot, (col, name)) in values
            .iter_mut()
            .zip(idx[2..].iter().zip(&PANEL_COLUMNS[2..]))
        {
            *slot = parse_field(&record, *col, name)?;
        }
        let obs = Observation {
            net_migration: values[0],
            active_pop: values[1],
            real_output: values[2],
            unemployment_rate: values[3],
            agri_employment: values[4],
            total_employment: values[5],
            wage_index: values[6],
            housing_stock: values[7],
        };
        validate_observation(&obs, || format!("({region}, {year})")).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::Parse {
                line: record_line(&record),
                message: msg,
            },
            other => other,
        })?;
        if cells.insert((region.clone(), year), obs).is_some() {
            return Err(Error::Parse {
                line: record_line(&record),
                message: format!("duplicate row for ({region}, {year})"),
            });
        }
    }

    let regions: Vec<String> = cells
        .keys()
        .map(|(r, _)| r.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let years: Vec<i32> = cells
        .keys()
        .map(|(_, y)| *y)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if regions.is_empty() {
        return Err(Error::InvalidInput("panel file has no data rows".into()));
    }

    let mut missing = Vec::new();
    let mut observations = Vec::with_capacity(regions.len() * years.len());
    for region in &regions {
        for year in &years {
            match cells.get(&(region.clone(), *year)) {
                Some(obs) => observations.push(*obs),
                None => missing.push((region.clone(), *year)),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::UnbalancedPanel { missing });
    }
    PanelDataset::new(regions, years, observations)
}

/// Loads region metadata (`region_id,name,nuts_level,lat,lon`).
pub fn load_regions_csv(path: &Path) -> Result<Vec<Region>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let idx = column_indices(&headers, &REGION_COLUMNS)?;
    let mut regions = Vec::new();
    let mut seen = BTreeSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let id: String = parse_field(&record, idx[0], "region_id")?;
        let name: String = parse_field(&record, idx[1], "name")?;
        let level: NutsLevel = parse_field(&record, idx[2], "nuts_level")?;
        let lat: f64 = parse_field(&record, idx[3], "lat")?;
        let lon: f64 = parse_field(&record, idx[4], "lon")?;
        if !seen.insert(id.clone()) {
            return Err(Error::Parse {
                line: record_line(&record),
                message: format!("duplicate region id `{id}`"),
            });
        }
        let region = Region::new(id, name, level, lat, lon).map_err(|e| Error::Parse {
            line: record_line(&record),
            message: e.to_string(),
        })?;
        regions.push(region);
    }
    Ok(regions)
}

pub fn regions_to_csv_string(regions: &[Region]) -> String {
    let mut out = REGION_COLUMNS.join(",");
    out.push('\n');
    for r in regions {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.id, r.name, r.nuts_level, r.latitude, r.longitude
        ));
    }
    out
}

/// Proportional growth `(value_t - value_prev) / value_prev`.
pub fn growth_rate(value_t: f64, value_prev: f64) -> Result<f64> {
    if value_prev <= 0.0 || !value_prev.is_finite() {
        return Err(Error::NonPositiveDenominator {
            field: "previous value".into(),
            key: format!("growth from {value_prev} to {value_t}"),
        });
    }
    Ok((value_t - value_prev) / value_prev)
}

/// Unweighted mean of `values` over every region other than `self_id`.
pub fn external_average(values: &[(&str, f64)], self_id: &str) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::SingleRegion);
    }
    if !values.iter().any(|(id, _)| *id == self_id) {
        return Err(Error::UnknownRegion(self_id.to_string()));
    }
    let others: Vec<f64> = values
        .iter()
        .filter(|(id, _)| *id != self_id)
        .map(|(_, v)| *v)
        .collect();
    Ok(others.iter().sum::<f64>() / others.len() as f64)
}

/// Own value minus the mean of all other entries, for every entry:
/// `v - (S - v)/(n - 1) = (n v - S)/(n - 1)`.
fn internal_minus_external(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let total: f64 = values.iter().sum();
    values
        .iter()
        .map(|&v| (n * v - total) / (n - 1.0))
        .collect()
}

/// How the agriculture regressor is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AgriMeasure {
    /// Agricultural employment divided by total employment.
    #[default]
    Share,
    /// Raw agricultural employment count.
    Headcount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MigrationRow {
    pub sm_pa: f64,
    pub r_diff: f64,
    pub d_diff: f64,
    pub a_share: f64,
    pub s_diff: f64,
    pub f_diff: f64,
}

/// Regression variables for every region and every usable year (all years
/// after the first). Rows are region-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrationVariables {
    regions: Vec<String>,
    years: Vec<i32>,
    rows: Vec<MigrationRow>,
}

impl MigrationVariables {
    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn rows(&self) -> &[MigrationRow] {
        &self.rows
    }

    pub fn row(&self, region: usize, year: usize) -> &MigrationRow {
        &self.rows[region * self.years.len() + year]
    }

    /// Keeps only the given usable year (a single cross-section).
    pub fn select_year(&self, year: i32) -> Result<MigrationVariables> {
        let t = self
            .years
            .iter()
            .position(|&y| y == year)
            .ok_or_else(|| Error::InvalidInput(format!("year {year} is not a usable year")))?;
        Ok(MigrationVariables {
            regions: self.regions.clone(),
            years: vec![year],
            rows: (0..self.regions.len()).map(|r| *self.row(r, t)).collect(),
        })
    }
}

pub fn build_migration_variables(panel: &PanelDataset) -> Result<MigrationVariables> {
    build_migration_variables_with(panel, AgriMeasure::Share)
}

pub fn build_migration_variables_with(
    panel: &PanelDataset,
    agri: AgriMeasure,
) -> Result<MigrationVariables> {
    let n = panel.n_regions();
    let n_years = panel.n_years();
    if n < 2 {
        return Err(Error::SingleRegion);
    }
    if n_years < 2 {
        return Err(Error::InvalidInput(
            "at least two years are needed to form growth rates".into(),
        ));
    }
    let usable = n_years - 1;
    let mut rows = vec![
        MigrationRow {
            sm_pa: 0.0,
            r_diff: 0.0,
            d_diff: 0.0,
            a_share: 0.0,
            s_diff: 0.0,
            f_diff: 0.0,
        };
        n * usable
    ];

    for t in 1..n_years {
        let growth = |field: &str, get: fn(&Observation) -> f64| -> Result<Vec<f64>> {
            (0..n)
                .map(|r| {
                    let prev = get(panel.observation(r, t - 1));
                    growth_rate(get(panel.observation(r, t)), prev).map_err(|_| {
                        Error::NonPositiveDenominator {
                            field: field.to_string(),
                            key: format!("({}, {})", panel.regions()[r], panel.years()[t - 1]),
                        }
                    })
                })
                .collect()
        };
        let output = internal_minus_external(&growth("real_output", |o| o.real_output)?);
        let wages = internal_minus_external(&growth("wage_index", |o| o.wage_index)?);
        let housing = internal_minus_external(&growth("housing_stock", |o| o.housing_stock)?);
        let unemployment: Vec<f64> = (0..n)
            .map(|r| panel.observation(r, t).unemployment_rate)
            .collect();
        let unemployment = internal_minus_external(&unemployment);

        for r in 0..n {
            let obs = panel.observation(r, t);
            rows[r * usable + (t - 1)] = MigrationRow {
                sm_pa: obs.net_migration / obs.active_pop,
                r_diff: output[r],
                d_diff: unemployment[r],
                a_share: match agri {
                    AgriMeasure::Share => obs.agri_employment / obs.total_employment,
                    AgriMeasure::Headcount => obs.agri_employment,
                },
                s_diff: wages[r],
                f_diff: housing[r],
            };
        }
    }

    Ok(MigrationVariables {
        regions: panel.regions().to_vec(),
        years: panel.years()[1..].to_vec(),
        rows,
    })
}

/// Builds the regression design `[intercept, r_diff, d_diff, a_share, s_diff?, f_diff?]`.
pub fn to_panel_design(
    vars: &MigrationVariables,
    include_wage: bool,
    include_housing: bool,
) -> Result<DesignMatrix> {
    let mut names = vec!["intercept", "r_diff", "d_diff", "a_share"];
    if include_wage {
        names.push("s_diff");
    }
    if include_housing {
        names.push("f_diff");
    }
    let n = vars.rows.len();
    let k = names.len();
    let mut x = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    let mut keys = Vec::with_capacity(n);
    let usable = vars.years.len();
    for (i, row) in vars.rows.iter().enumerate() {
        y[i] = row.sm_pa;
        let mut values = vec![1.0, row.r_diff, row.d_diff, row.a_share];
        if include_wage {
            values.push(row.s_diff);
        }
        if include_housing {
            values.push(row.f_diff);
        }
        for (j, v) in values.into_iter().enumerate() {
            x[(i, j)] = v;
        }
        keys.push(RowKey {
            region: vars.regions[i / usable].clone(),
            year: vars.years[i % usable],
        });
    }
    DesignMatrix::new(y, x, names.into_iter().map(String::from).collect(), keys)
}

/// Index of each region id in `order`.
pub(crate) fn region_index(order: &[String]) -> HashMap<&str, usize> {
    order
        .iter()
        .enumerate()
        .map(|(i, r)| (r.as_str(), i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "region_id,year,net_migration,active_pop,real_output,unemployment_rate,agri_employment,total_employment,wage_index,housing_stock\n";

    fn row(region: &str, year: i32, active: f64) -> String {
        format!("{region},{year},100,{active},1000,0.05,10,200,100,500\n")
    }

    fn parse(text: &str) -> Result<PanelDataset> {
        read_panel_csv(text.as_bytes(), Path::new("inline.csv"))
    }

    #[test]
    fn minimal_complete_panel() {
        let mut text = HEADER.to_string();
        for r in ["B", "A"] {
            for y in [2002, 2000, 2001] {
                text.push_str(&row(r, y, 1000.0));
            }
        }
        let panel = parse(&text).unwrap();
        assert_eq!(panel.years(), &[2000, 2001, 2002]);
        assert_eq!(panel.regions(), &["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn missing_row_is_unbalanced() {
        let mut text = HEADER.to_string();
        for r in ["A", "B"] {
            for y in [2000, 2001, 2002] {
                if !(r == "B" && y == 2001) {
                    text.push_str(&row(r, y, 1000.0));
                }
            }
        }
        match parse(&text) {
            Err(Error::UnbalancedPanel { missing }) => {
                assert_eq!(missing, vec![("B".to_string(), 2001)])
            }
            other => panic!("expected UnbalancedPanel, got {other:?}"),
        }
    }

    #[test]
    fn zero_active_population_rejected() {
        let mut text = HEADER.to_string();
        text.push_str(&row("A", 2000, 1000.0));
        text.push_str(&row("A", 2001, 0.0));
        match parse(&text) {
            Err(Error::NonPositiveDenominator { field, key }) => {
                assert_eq!(field, "active_pop");
                assert!(key.contains("A") && key.contains("2001"));
            }
            other => panic!("expected NonPositiveDenominator, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_parse_line() {
        let text = "region_id,year,net_migration\nA,2000,1\n";
        assert!(matches!(parse(text), Err(Error::MissingColumn(c)) if c == "active_pop"));

        let mut text = HEADER.to_string();
        text.push_str(&row("A", 2000, 1000.0));
        text.push_str("A,2001,abc,1000,1000,0.05,10,200,100,500\n");
        match parse(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn growth_rate_examples() {
        assert!((growth_rate(110.0, 100.0).unwrap() - 0.10).abs() < 1e-15);
        assert_eq!(growth_rate(100.0, 100.0).unwrap(), 0.0);
        assert!((growth_rate(90.0, 100.0).unwrap() + 0.10).abs() < 1e-15);
        assert!(matches!(
            growth_rate(1.0, 0.0),
            Err(Error::NonPositiveDenominator { .. })
        ));
    }

    #[test]
    fn external_average_examples() {
        let v = [("A", 0.02), ("B", 0.04), ("C", 0.06)];
        assert!((external_average(&v, "A").unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(
            external_average(&[("A", 1.5), ("B", 7.25)], "A").unwrap(),
            7.25
        );
        let same = [("A", 3.0), ("B", 3.0), ("C", 3.0), ("D", 3.0)];
        for id in ["A", "B", "C", "D"] {
            assert_eq!(external_average(&same, id).unwrap(), 3.0);
        }
        assert!(matches!(
            external_average(&[("A", 1.0)], "A"),
            Err(Error::SingleRegion)
        ));
    }

    fn obs(output: f64) -> Observation {
        Observation {
            net_migration: 10.0,
            active_pop: 1000.0,
            real_output: output,
            unemployment_rate: 0.1,
            agri_employment: 20.0,
            total_employment: 400.0,
            wage_index: 100.0,
            housing_stock: 300.0,
        }
    }

    #[test]
    fn output_differential_three_regions() {
        let observations = vec![
            obs(100.0),
            obs(102.0),
            obs(100.0),
            obs(104.0),
            obs(100.0),
            obs(106.0),
        ];
        let panel = PanelDataset::new(
            vec!["R1".into(), "R2".into(), "R3".into()],
            vec![2000, 2001],
            observations,
        )
        .unwrap();
        let vars = build_migration_variables(&panel).unwrap();
        assert!((vars.row(0, 0).r_diff + 0.03).abs() < 1e-12);
        assert!((vars.row(0, 0).a_share - 0.05).abs() < 1e-15);
        assert!((vars.row(0, 0).sm_pa - 0.01).abs() < 1e-15);
    }

    #[test]
    fn identical_regions_have_zero_differentials() {
        let panel = PanelDataset::new(
            vec!["A".into(), "B".into(), "C".into()],
            vec![1, 2, 3],
            [obs(50.0), obs(55.0), obs(60.0)].repeat(3),
        )
        .unwrap();
        let vars = build_migration_variables(&panel).unwrap();
        for row in vars.rows() {
            assert_eq!(row.r_diff, 0.0);
            assert_eq!(row.d_diff, 0.0);
            assert_eq!(row.s_diff, 0.0);
            assert_eq!(row.f_diff, 0.0);
        }
    }

    #[test]
    fn design_shapes() {
        let panel = PanelDataset::new(
            vec!["A".into(), "B".into()],
            vec![1991, 2001],
            vec![obs(50.0), obs(55.0), obs(60.0), obs(61.0)],
        )
        .unwrap();
        let vars = build_migration_variables(&panel).unwrap();
        let full = to_panel_design(&vars, true, true).unwrap_err();
        // two rows cannot support six columns
        assert!(matches!(full, Error::InvalidInput(_)));

        let panel = PanelDataset::new(
            (0..8).map(|i| format!("R{i}")).collect(),
            vec![1991, 2001],
            (0..16).map(|i| obs(50.0 + (i * i) as f64)).collect(),
        )
        .unwrap();
        let vars = build_migration_variables(&panel).unwrap();
        let nuts2 = to_panel_design(&vars, true, true).unwrap();
        assert_eq!(nuts2.ncols(), 6);
        let nuts3 = to_panel_design(&vars, false, true).unwrap();
        assert_eq!(nuts3.ncols(), 5);
        assert_eq!(
            nuts3.column_names(),
            &["intercept", "r_diff", "d_diff", "a_share", "f_diff"]
        );
        assert_eq!(nuts3.nrows(), 8);
    }

    #[test]
    fn headcount_mode() {
        let panel = PanelDataset::new(vec!["A".into(), "B".into()], vec![1, 2], vec![obs(50.0); 4])
            .unwrap();
        let vars = build_migration_variables_with(&panel, AgriMeasure::Headcount).unwrap();
        assert_eq!(vars.row(1, 0).a_share, 20.0);
    }
}
